#include <algorithm>
#include <cstddef>
#include <string>

#include "gemm.hpp"
#include "vesselnet/nn/ops.hpp"

namespace vesselnet::nn {

ConvSpec ConvSpec::cube(std::size_t rank, std::size_t in_channels, std::size_t out_channels,
                        std::size_t kernel, std::size_t stride) {
  return cube(rank, in_channels, out_channels, kernel, stride, kernel / 2, 1);
}

ConvSpec ConvSpec::cube(std::size_t rank, std::size_t in_channels, std::size_t out_channels,
                        std::size_t kernel, std::size_t stride, std::size_t padding,
                        std::size_t groups) {
  ConvSpec s;
  s.rank = rank;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.groups = groups;
  s.kernel.assign(rank, kernel);
  s.stride.assign(rank, stride);
  s.padding.assign(rank, padding);
  s.validate();
  return s;
}

void ConvSpec::validate() const {
  if (rank != 2 && rank != 3) throw ShapeError("conv: rank must be 2 or 3, got " + std::to_string(rank));
  if (kernel.size() != rank || stride.size() != rank || padding.size() != rank) {
    throw ShapeError("conv: kernel/stride/padding need one entry per spatial axis");
  }
  if (in_channels == 0 || out_channels == 0) throw ShapeError("conv: channel counts must be positive");
  if (groups == 0 || in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("conv: groups must divide in and out channels");
  }
  for (std::size_t a = 0; a < rank; ++a) {
    if (kernel[a] == 0) throw ShapeError("conv: spatial axis " + std::to_string(a) + " has zero kernel");
    if (stride[a] == 0) throw ShapeError("conv: spatial axis " + std::to_string(a) + " has zero stride");
  }
}

Shape ConvSpec::weight_shape() const {
  Shape s{out_channels, in_channels / groups};
  s.insert(s.end(), kernel.begin(), kernel.end());
  return s;
}

Shape ConvSpec::output_spatial(std::span<const std::size_t> input_spatial) const {
  if (input_spatial.size() != rank) {
    throw ShapeError("conv: expected " + std::to_string(rank) + " spatial axes, got " +
                     std::to_string(input_spatial.size()));
  }
  Shape out(rank);
  for (std::size_t a = 0; a < rank; ++a) {
    const std::size_t span = input_spatial[a] + 2 * padding[a];
    if (span < kernel[a]) {
      throw ShapeError("conv: spatial axis " + std::to_string(a) + " (input axis " +
                       std::to_string(a + 2) + ") of extent " + std::to_string(input_spatial[a]) +
                       " is smaller than kernel " + std::to_string(kernel[a]));
    }
    out[a] = (span - kernel[a]) / stride[a] + 1;
  }
  return out;
}

namespace {

// Everything is carried as three spatial axes; rank-2 input gets a leading
// unit depth axis.
struct Geometry {
  std::size_t batch, cin, cout, groups, cin_g, cout_g;
  std::size_t in[3], out[3], k[3], s[3], p[3];
  std::size_t in_sp, out_sp, kvol;
  bool pointwise;
  bool depthwise;
};

Geometry make_geometry(const Shape& x, const Shape& out_spatial, const ConvSpec& spec) {
  Geometry g{};
  g.batch = x[0];
  g.cin = spec.in_channels;
  g.cout = spec.out_channels;
  g.groups = spec.groups;
  g.cin_g = g.cin / g.groups;
  g.cout_g = g.cout / g.groups;
  const std::size_t lead = 3 - spec.rank;
  for (std::size_t a = 0; a < 3; ++a) {
    if (a < lead) {
      g.in[a] = g.out[a] = g.k[a] = g.s[a] = 1;
      g.p[a] = 0;
    } else {
      g.in[a] = x[2 + a - lead];
      g.out[a] = out_spatial[a - lead];
      g.k[a] = spec.kernel[a - lead];
      g.s[a] = spec.stride[a - lead];
      g.p[a] = spec.padding[a - lead];
    }
  }
  g.in_sp = g.in[0] * g.in[1] * g.in[2];
  g.out_sp = g.out[0] * g.out[1] * g.out[2];
  g.kvol = g.k[0] * g.k[1] * g.k[2];
  g.pointwise = g.kvol == 1 && g.s[0] == 1 && g.s[1] == 1 && g.s[2] == 1 && g.p[0] == 0 &&
                g.p[1] == 0 && g.p[2] == 0;
  g.depthwise = g.groups > 1 && g.cin_g == 1 && g.cout_g == 1;
  return g;
}

// Output indices o with 0 <= o*stride + offset - pad < n_in.
struct Range {
  std::size_t lo, hi;
};

Range valid_range(std::size_t n_in, std::size_t n_out, std::size_t stride, std::size_t pad,
                  std::size_t offset) {
  const auto in = static_cast<std::ptrdiff_t>(n_in);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto shift = static_cast<std::ptrdiff_t>(offset) - static_cast<std::ptrdiff_t>(pad);
  std::ptrdiff_t lo = 0;
  if (shift < 0) lo = (-shift + s - 1) / s;
  std::ptrdiff_t hi = 0;
  if (in - 1 - shift >= 0) hi = (in - 1 - shift) / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n_out));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Visits every (kernel tap, output row) pair with the valid output column
// range; fn(tap, out_row_offset, in_row_offset, ox_lo, ox_hi, kx).
template <class Fn>
void for_each_tap(const Geometry& g, Fn&& fn) {
  std::size_t tap = 0;
  for (std::size_t kz = 0; kz < g.k[0]; ++kz) {
    const Range rz = valid_range(g.in[0], g.out[0], g.s[0], g.p[0], kz);
    for (std::size_t ky = 0; ky < g.k[1]; ++ky) {
      const Range ry = valid_range(g.in[1], g.out[1], g.s[1], g.p[1], ky);
      for (std::size_t kx = 0; kx < g.k[2]; ++kx, ++tap) {
        const Range rx = valid_range(g.in[2], g.out[2], g.s[2], g.p[2], kx);
        for (std::size_t oz = rz.lo; oz < rz.hi; ++oz) {
          const std::size_t iz = oz * g.s[0] + kz - g.p[0];
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * g.s[1] + ky - g.p[1];
            fn(tap, (oz * g.out[1] + oy) * g.out[2], (iz * g.in[1] + iy) * g.in[2], rx.lo, rx.hi, kx);
          }
        }
      }
    }
  }
}

template <class T>
void im2col(const Geometry& g, const T* x, T* cols) {
  std::fill(cols, cols + g.cin_g * g.kvol * g.out_sp, T(0));
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    const T* xc = x + c * g.in_sp;
    T* rows = cols + c * g.kvol * g.out_sp;
    for_each_tap(g, [&](std::size_t tap, std::size_t orow, std::size_t irow, std::size_t lo,
                        std::size_t hi, std::size_t kx) {
      T* dst = rows + tap * g.out_sp + orow;
      const std::size_t base = irow + kx - g.p[2];  // unsigned wrap cancels below
      for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = xc[base + ox * g.s[2]];
    });
  }
}

template <class T>
void col2im(const Geometry& g, const T* cols, T* dx) {
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    T* xc = dx + c * g.in_sp;
    const T* rows = cols + c * g.kvol * g.out_sp;
    for_each_tap(g, [&](std::size_t tap, std::size_t orow, std::size_t irow, std::size_t lo,
                        std::size_t hi, std::size_t kx) {
      const T* src = rows + tap * g.out_sp + orow;
      const std::size_t base = irow + kx - g.p[2];
      for (std::size_t ox = lo; ox < hi; ++ox) xc[base + ox * g.s[2]] += src[ox];
    });
  }
}

template <class T>
void check_conv_operands(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& w,
                         const Tensor<T>& b) {
  spec.validate();
  if (x.rank() != spec.rank + 2) {
    throw ShapeError("conv_nd: input rank " + std::to_string(x.rank()) + " but spec needs " +
                     std::to_string(spec.rank + 2) + " (batch, channels, spatial...)");
  }
  if (x.dim(1) != spec.in_channels) {
    throw ShapeError("conv_nd: input axis 1 (channels) has extent " + std::to_string(x.dim(1)) +
                     ", spec expects " + std::to_string(spec.in_channels));
  }
  const Shape ws = spec.weight_shape();
  if (w.rank() != ws.size()) {
    throw ShapeError("conv_nd: weight rank " + std::to_string(w.rank()) + ", expected " +
                     std::to_string(ws.size()));
  }
  for (std::size_t a = 0; a < ws.size(); ++a) {
    if (w.dim(a) != ws[a]) {
      throw ShapeError("conv_nd: weight axis " + std::to_string(a) + " has extent " +
                       std::to_string(w.dim(a)) + ", expected " + std::to_string(ws[a]));
    }
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != spec.out_channels)) {
    throw ShapeError("conv_nd: bias axis 0 must have extent " + std::to_string(spec.out_channels));
  }
}

template <class T>
void conv_forward(const Geometry& g, const T* x, const T* w, const T* b, T* out) {
  if (g.depthwise) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.cout; ++c) {
        const T* xs = x + (n * g.cin + c) * g.in_sp;
        T* os = out + (n * g.cout + c) * g.out_sp;
        const T* wk = w + c * g.kvol;
        for_each_tap(g, [&](std::size_t tap, std::size_t orow, std::size_t irow, std::size_t lo,
                            std::size_t hi, std::size_t kx) {
          const T wv = wk[tap];
          T* dst = os + orow;
          const std::size_t base = irow + kx - g.p[2];
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] += wv * xs[base + ox * g.s[2]];
        });
      }
    }
  } else {
    std::vector<T> cols;
    if (!g.pointwise) cols.resize(g.cin_g * g.kvol * g.out_sp);
    const std::size_t kdim = g.cin_g * g.kvol;
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        const T* xs = x + (n * g.cin + grp * g.cin_g) * g.in_sp;
        const T* src = xs;
        if (!g.pointwise) {
          im2col(g, xs, cols.data());
          src = cols.data();
        }
        detail::gemm_nn(g.cout_g, g.out_sp, kdim, w + grp * g.cout_g * kdim, src,
                        out + (n * g.cout + grp * g.cout_g) * g.out_sp);
      }
    }
  }
  if (b) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.cout; ++c) {
        T* os = out + (n * g.cout + c) * g.out_sp;
        for (std::size_t i = 0; i < g.out_sp; ++i) os[i] += b[c];
      }
    }
  }
}

template <class T>
void conv_backward(const Geometry& g, const T* x, const T* w, const T* dout, T* dx, T* dw, T* db) {
  if (db) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.cout; ++c) {
        const T* ds = dout + (n * g.cout + c) * g.out_sp;
        T s = T(0);
        for (std::size_t i = 0; i < g.out_sp; ++i) s += ds[i];
        db[c] += s;
      }
    }
  }
  if (g.depthwise) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.cout; ++c) {
        const T* xs = x + (n * g.cin + c) * g.in_sp;
        const T* ds = dout + (n * g.cout + c) * g.out_sp;
        T* dxs = dx ? dx + (n * g.cin + c) * g.in_sp : nullptr;
        const T* wk = w + c * g.kvol;
        T* dwk = dw ? dw + c * g.kvol : nullptr;
        for_each_tap(g, [&](std::size_t tap, std::size_t orow, std::size_t irow, std::size_t lo,
                            std::size_t hi, std::size_t kx) {
          const T* d = ds + orow;
          const std::size_t base = irow + kx - g.p[2];
          if (dwk) {
            T s = T(0);
            for (std::size_t ox = lo; ox < hi; ++ox) s += d[ox] * xs[base + ox * g.s[2]];
            dwk[tap] += s;
          }
          if (dxs) {
            const T wv = wk[tap];
            for (std::size_t ox = lo; ox < hi; ++ox) dxs[base + ox * g.s[2]] += wv * d[ox];
          }
        });
      }
    }
    return;
  }
  const std::size_t kdim = g.cin_g * g.kvol;
  std::vector<T> cols;
  std::vector<T> dcols;
  if (!g.pointwise) {
    cols.resize(kdim * g.out_sp);
    if (dx) dcols.resize(kdim * g.out_sp);
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const T* xs = x + (n * g.cin + grp * g.cin_g) * g.in_sp;
      const T* ds = dout + (n * g.cout + grp * g.cout_g) * g.out_sp;
      const T* wg = w + grp * g.cout_g * kdim;
      if (dw) {
        const T* src = xs;
        if (!g.pointwise) {
          im2col(g, xs, cols.data());
          src = cols.data();
        }
        detail::gemm_nt(g.cout_g, kdim, g.out_sp, ds, src, dw + grp * g.cout_g * kdim);
      }
      if (dx) {
        T* dxs = dx + (n * g.cin + grp * g.cin_g) * g.in_sp;
        if (g.pointwise) {
          detail::gemm_tn(g.cout_g, g.out_sp, kdim, wg, ds, dxs);
        } else {
          std::fill(dcols.begin(), dcols.end(), T(0));
          detail::gemm_tn(g.cout_g, g.out_sp, kdim, wg, ds, dcols.data());
          col2im(g, dcols.data(), dxs);
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv_nd(const Tensor<T>& input, const ConvSpec& spec, const Tensor<T>& weight,
                  const Tensor<T>& bias) {
  check_conv_operands(input, spec, weight, bias);
  const Shape& xs = input.shape();
  const Shape out_spatial = spec.output_spatial(std::span<const std::size_t>(xs).subspan(2));
  const Geometry g = make_geometry(xs, out_spatial, spec);

  Shape out_shape{g.batch, g.cout};
  out_shape.insert(out_shape.end(), out_spatial.begin(), out_spatial.end());
  std::vector<T> out(g.batch * g.cout * g.out_sp, T(0));
  conv_forward(g, input.data().data(), weight.data().data(),
               bias.defined() ? bias.data().data() : nullptr, out.data());

  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(out_shape), std::move(out), "conv_nd", inputs, [g](Node<T>& self) {
    auto& x = *self.parents[0];
    auto& w = *self.parents[1];
    Node<T>* b = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    T* dx = x.requires_grad ? x.grad.data() : nullptr;
    T* dw = w.requires_grad ? w.grad.data() : nullptr;
    T* db = (b && b->requires_grad) ? b->grad.data() : nullptr;
    conv_backward(g, x.value.data(), w.value.data(), self.grad.data(), dx, dw, db);
  });
}

template Tensor<float> conv_nd(const Tensor<float>&, const ConvSpec&, const Tensor<float>&,
                               const Tensor<float>&);
template Tensor<double> conv_nd(const Tensor<double>&, const ConvSpec&, const Tensor<double>&,
                                const Tensor<double>&);

}  // namespace vesselnet::nn
