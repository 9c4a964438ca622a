#include "vesselnet/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"

namespace vesselnet::nn {

namespace {

std::size_t spatial_volume(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t a = 2; a < s.size(); ++a) n *= s[a];
  return n;
}

void require_rank_at_least(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() < rank) {
    throw ShapeError(std::string(op) + ": input rank " + std::to_string(s.size()) +
                     " is below the required " + std::to_string(rank));
  }
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <class T>
BatchNormParams<T> BatchNormParams<T>::make(std::size_t channels) {
  BatchNormParams p;
  p.gamma = Tensor<T>(Shape{channels}, T(1));
  p.beta = Tensor<T>(Shape{channels}, T(0));
  p.running_mean = Tensor<T>(Shape{channels}, T(0));
  p.running_var = Tensor<T>(Shape{channels}, T(1));
  p.gamma.set_requires_grad(true);
  p.beta.set_requires_grad(true);
  return p;
}

template <class T>
Tensor<T> batch_norm(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode,
                     const BatchNormConfig& config) {
  const Shape& s = input.shape();
  require_rank_at_least("batch_norm", s, 2);
  const std::size_t batch = s[0], channels = s[1], sp = spatial_volume(s);
  if (params.channels() != channels || params.beta.size() != channels ||
      params.running_mean.size() != channels || params.running_var.size() != channels) {
    throw ShapeError("batch_norm: input axis 1 has extent " + std::to_string(channels) +
                     " but parameters hold " + std::to_string(params.channels()) + " channels");
  }
  const std::size_t count = batch * sp;
  const T eps = static_cast<T>(config.epsilon);
  const auto x = input.data();
  const auto gamma = params.gamma.data();
  const auto beta = params.beta.data();
  std::vector<T> out(x.size());
  std::vector<T> mean(channels), inv_std(channels);

  if (mode == Mode::Train) {
    if (count < 2) {
      throw ShapeError("batch_norm: train mode needs more than one value per channel (batch x spatial = " +
                       std::to_string(count) + ")");
    }
    auto rm = params.running_mean.data();
    auto rv = params.running_var.data();
    const T mom = static_cast<T>(config.momentum);
    for (std::size_t c = 0; c < channels; ++c) {
      T sum = T(0);
      for (std::size_t n = 0; n < batch; ++n) {
        const T* xs = x.data() + (n * channels + c) * sp;
        for (std::size_t i = 0; i < sp; ++i) sum += xs[i];
      }
      const T mu = sum / static_cast<T>(count);
      T sq = T(0);
      for (std::size_t n = 0; n < batch; ++n) {
        const T* xs = x.data() + (n * channels + c) * sp;
        for (std::size_t i = 0; i < sp; ++i) sq += (xs[i] - mu) * (xs[i] - mu);
      }
      const T var = sq / static_cast<T>(count);
      mean[c] = mu;
      inv_std[c] = T(1) / std::sqrt(var + eps);
      rm[c] = (T(1) - mom) * rm[c] + mom * mu;
      rv[c] = (T(1) - mom) * rv[c] + mom * var;
    }
  } else {
    const auto rm = params.running_mean.data();
    const auto rv = params.running_var.data();
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = rm[c];
      inv_std[c] = T(1) / std::sqrt(rv[c] + eps);
    }
  }

  std::vector<T> xhat(x.size());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * sp;
      for (std::size_t i = 0; i < sp; ++i) {
        const T h = (x[off + i] - mean[c]) * inv_std[c];
        xhat[off + i] = h;
        out[off + i] = gamma[c] * h + beta[c];
      }
    }
  }

  const bool train = mode == Mode::Train;
  return make_result<T>(
      s, std::move(out), "batch_norm", {input, params.gamma, params.beta},
      [batch, channels, sp, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& gn = *self.parents[1];
        auto& bn = *self.parents[2];
        const T* dy = self.grad.data();
        const auto count = static_cast<T>(batch * sp);
        for (std::size_t c = 0; c < channels; ++c) {
          T sum_dy = T(0), sum_dy_xhat = T(0);
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * channels + c) * sp;
            for (std::size_t i = 0; i < sp; ++i) {
              sum_dy += dy[off + i];
              sum_dy_xhat += dy[off + i] * xhat[off + i];
            }
          }
          if (gn.requires_grad) gn.grad[c] += sum_dy_xhat;
          if (bn.requires_grad) bn.grad[c] += sum_dy;
          if (!xn.requires_grad) continue;
          const T g = gn.value[c] * inv_std[c];
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * channels + c) * sp;
            for (std::size_t i = 0; i < sp; ++i) {
              if (train) {
                xn.grad[off + i] +=
                    g * (dy[off + i] - sum_dy / count - xhat[off + i] * sum_dy_xhat / count);
              } else {
                xn.grad[off + i] += g * dy[off + i];
              }
            }
          }
        }
      });
}

template <class T>
Tensor<T> activation(ActivationKind kind, const Tensor<T>& x) {
  const auto v = x.data();
  std::vector<T> out(v.size());
  const char* name = "silu";
  switch (kind) {
    case ActivationKind::SiLU:
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * sigmoid_scalar(v[i]);
      break;
    case ActivationKind::ReLU:
      name = "relu";
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > T(0) ? v[i] : T(0);
      break;
    case ActivationKind::Sigmoid:
      name = "sigmoid";
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid_scalar(v[i]);
      break;
  }
  return make_result<T>(x.shape(), std::move(out), name, {x}, [kind](Node<T>& self) {
    auto& xn = *self.parents[0];
    const auto& xv = xn.value;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      T d;
      switch (kind) {
        case ActivationKind::SiLU: {
          const T sg = sigmoid_scalar(xv[i]);
          d = sg * (T(1) + xv[i] * (T(1) - sg));
          break;
        }
        case ActivationKind::ReLU:
          d = xv[i] > T(0) ? T(1) : T(0);
          break;
        default: {
          const T sg = self.value[i];
          d = sg * (T(1) - sg);
          break;
        }
      }
      xn.grad[i] += d * self.grad[i];
    }
  });
}

template <class T>
Tensor<T> global_pool(PoolKind kind, const Tensor<T>& x) {
  const Shape& s = x.shape();
  require_rank_at_least("global_pool", s, 3);
  const std::size_t bc = s[0] * s[1], sp = spatial_volume(s);
  const auto v = x.data();
  std::vector<T> out(bc);
  std::vector<std::size_t> argmax;
  if (kind == PoolKind::Max) argmax.resize(bc);
  for (std::size_t i = 0; i < bc; ++i) {
    const T* row = v.data() + i * sp;
    if (kind == PoolKind::Max) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < sp; ++j) {
        if (row[j] > row[best]) best = j;
      }
      argmax[i] = best;
      out[i] = row[best];
    } else {
      T sum = T(0);
      for (std::size_t j = 0; j < sp; ++j) sum += row[j];
      out[i] = sum / static_cast<T>(sp);
    }
  }
  return make_result<T>(Shape{s[0], s[1]}, std::move(out),
                        kind == PoolKind::Max ? "global_max_pool" : "global_avg_pool", {x},
                        [kind, bc, sp, argmax = std::move(argmax)](Node<T>& self) {
                          auto& xn = *self.parents[0];
                          for (std::size_t i = 0; i < bc; ++i) {
                            if (kind == PoolKind::Max) {
                              xn.grad[i * sp + argmax[i]] += self.grad[i];
                            } else {
                              const T g = self.grad[i] / static_cast<T>(sp);
                              for (std::size_t j = 0; j < sp; ++j) xn.grad[i * sp + j] += g;
                            }
                          }
                        });
}

template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2) throw ShapeError("dense: input must be [batch, features], got " + shape_string(x.shape()));
  if (weight.rank() != 2 || weight.dim(0) != x.dim(1)) {
    throw ShapeError("dense: weight axis 0 must match input axis 1 (" + std::to_string(x.dim(1)) +
                     "), weight is " + shape_string(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(1)) {
    throw ShapeError("dense: bias axis 0 must match weight axis 1 (" + std::to_string(weight.dim(1)) + ")");
  }
  const std::size_t b = x.dim(0), f = x.dim(1), g = weight.dim(1);
  std::vector<T> out(b * g);
  for (std::size_t i = 0; i < b; ++i) std::copy(bias.data().begin(), bias.data().end(), out.begin() + i * g);
  detail::gemm_nn(b, g, f, x.data().data(), weight.data().data(), out.data());
  return make_result<T>(Shape{b, g}, std::move(out), "dense", {x, weight, bias}, [b, f, g](Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    const T* dy = self.grad.data();
    if (xn.requires_grad) {
      // dx[B,F] += dy[B,G] * W[F,G]^T
      detail::gemm_nt(b, f, g, dy, wn.value.data(), xn.grad.data());
    }
    if (wn.requires_grad) {
      // dW[F,G] += x[B,F]^T * dy[B,G]
      detail::gemm_tn(b, g, f, xn.value.data(), dy, wn.grad.data());
    }
    if (bn.requires_grad) {
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < g; ++j) bn.grad[j] += dy[i * g + j];
      }
    }
  });
}

template <class T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& gate) {
  const Shape& s = x.shape();
  require_rank_at_least("scale_channels", s, 2);
  if (gate.rank() != 2 || gate.dim(0) != s[0] || gate.dim(1) != s[1]) {
    throw ShapeError("scale_channels: gate must be [" + std::to_string(s[0]) + "," + std::to_string(s[1]) +
                     "], got " + shape_string(gate.shape()));
  }
  const std::size_t bc = s[0] * s[1], sp = spatial_volume(s);
  const auto xv = x.data();
  const auto gv = gate.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < bc; ++i) {
    for (std::size_t j = 0; j < sp; ++j) out[i * sp + j] = xv[i * sp + j] * gv[i];
  }
  return make_result<T>(s, std::move(out), "scale_channels", {x, gate}, [bc, sp](Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& gn = *self.parents[1];
    for (std::size_t i = 0; i < bc; ++i) {
      const T* dy = self.grad.data() + i * sp;
      if (xn.requires_grad) {
        for (std::size_t j = 0; j < sp; ++j) xn.grad[i * sp + j] += dy[j] * gn.value[i];
      }
      if (gn.requires_grad) {
        T sum = T(0);
        for (std::size_t j = 0; j < sp; ++j) sum += dy[j] * xn.value[i * sp + j];
        gn.grad[i] += sum;
      }
    }
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>(a.shape(), std::move(out), "add", {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mean_of(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw ShapeError("mean_of: no inputs");
  for (const auto& x : xs) {
    if (x.shape() != xs[0].shape()) {
      throw ShapeError("mean_of: shape " + shape_string(x.shape()) + " differs from " +
                       shape_string(xs[0].shape()));
    }
  }
  const T scale = T(1) / static_cast<T>(xs.size());
  const T count = static_cast<T>(xs.size());
  std::vector<T> out(xs[0].size());
  // Summing each element's inputs in sorted order makes the result exactly
  // invariant under permutation of xs.
  std::vector<T> column(xs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < xs.size(); ++k) column[k] = xs[k].data()[i];
    std::sort(column.begin(), column.end());
    T sum = T(0);
    for (T c : column) sum += c;
    out[i] = sum / count;
  }
  return make_result<T>(xs[0].shape(), std::move(out), "mean_of", xs, [scale](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += scale * self.grad[i];
    }
  });
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& s0 = xs[0].shape();
  require_rank_at_least("concat_channels", s0, 2);
  std::size_t channels = 0;
  std::vector<std::size_t> offsets;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.size() != s0.size() || s[0] != s0[0]) throw ShapeError("concat_channels: batch axis 0 differs");
    for (std::size_t a = 2; a < s.size(); ++a) {
      if (s[a] != s0[a]) throw ShapeError("concat_channels: spatial axis " + std::to_string(a) + " differs");
    }
    offsets.push_back(channels);
    channels += s[1];
  }
  const std::size_t batch = s0[0], sp = spatial_volume(s0);
  Shape out_shape = s0;
  out_shape[1] = channels;
  std::vector<T> out(batch * channels * sp);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const std::size_t ck = xs[k].dim(1);
    const auto v = xs[k].data();
    for (std::size_t n = 0; n < batch; ++n) {
      std::copy_n(v.data() + n * ck * sp, ck * sp, out.data() + (n * channels + offsets[k]) * sp);
    }
  }
  return make_result<T>(std::move(out_shape), std::move(out), "concat_channels", xs,
                        [batch, channels, sp, offsets](Node<T>& self) {
                          for (std::size_t k = 0; k < self.parents.size(); ++k) {
                            auto& p = *self.parents[k];
                            if (!p.requires_grad) continue;
                            const std::size_t ck = p.shape[1];
                            for (std::size_t n = 0; n < batch; ++n) {
                              const T* src = self.grad.data() + (n * channels + offsets[k]) * sp;
                              T* dst = p.grad.data() + n * ck * sp;
                              for (std::size_t i = 0; i < ck * sp; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  const Shape& s = x.shape();
  require_rank_at_least("slice_channels", s, 2);
  if (count == 0 || begin + count > s[1]) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") exceeds axis 1 extent " + std::to_string(s[1]));
  }
  const std::size_t batch = s[0], channels = s[1], sp = spatial_volume(s);
  Shape out_shape = s;
  out_shape[1] = count;
  std::vector<T> out(batch * count * sp);
  const auto v = x.data();
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(v.data() + (n * channels + begin) * sp, count * sp, out.data() + n * count * sp);
  }
  return make_result<T>(std::move(out_shape), std::move(out), "slice_channels", {x},
                        [batch, channels, sp, begin, count](Node<T>& self) {
                          auto& p = *self.parents[0];
                          for (std::size_t n = 0; n < batch; ++n) {
                            const T* src = self.grad.data() + n * count * sp;
                            T* dst = p.grad.data() + (n * channels + begin) * sp;
                            for (std::size_t i = 0; i < count * sp; ++i) dst[i] += src[i];
                          }
                        });
}

template <class T>
Tensor<T> avg_pool_same(const Tensor<T>& x, std::size_t kernel) {
  const Shape& s = x.shape();
  if (s.size() != 4 && s.size() != 5) throw ShapeError("avg_pool_same: input must have 2 or 3 spatial axes");
  if (kernel == 0 || kernel % 2 == 0) throw ShapeError("avg_pool_same: kernel must be odd");
  // Treat rank-2 spatial input as unit depth.
  const std::size_t d = s.size() == 5 ? s[2] : 1;
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  const std::size_t kd = s.size() == 5 ? kernel : 1;
  const std::size_t bc = s[0] * s[1], sp = d * h * w;
  const auto r = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto rd = static_cast<std::ptrdiff_t>(kd / 2);
  // Per-cell window bounds are shared across channels; precompute divisors.
  auto window = [&](std::ptrdiff_t c, std::ptrdiff_t rad, std::size_t n) {
    return std::pair<std::ptrdiff_t, std::ptrdiff_t>(std::max<std::ptrdiff_t>(0, c - rad),
                                                     std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, c + rad));
  };
  std::vector<T> out(x.size(), T(0));
  const auto v = x.data();
  for (std::size_t i = 0; i < bc; ++i) {
    const T* src = v.data() + i * sp;
    T* dst = out.data() + i * sp;
    for (std::size_t z = 0; z < d; ++z) {
      const auto [z0, z1] = window(static_cast<std::ptrdiff_t>(z), rd, d);
      for (std::size_t y = 0; y < h; ++y) {
        const auto [y0, y1] = window(static_cast<std::ptrdiff_t>(y), r, h);
        for (std::size_t xx = 0; xx < w; ++xx) {
          const auto [x0, x1] = window(static_cast<std::ptrdiff_t>(xx), r, w);
          T sum = T(0);
          for (auto zz = z0; zz <= z1; ++zz)
            for (auto yy = y0; yy <= y1; ++yy)
              for (auto xi = x0; xi <= x1; ++xi) sum += src[(zz * static_cast<std::ptrdiff_t>(h) + yy) * static_cast<std::ptrdiff_t>(w) + xi];
          const auto n = (z1 - z0 + 1) * (y1 - y0 + 1) * (x1 - x0 + 1);
          dst[(z * h + y) * w + xx] = sum / static_cast<T>(n);
        }
      }
    }
  }
  return make_result<T>(s, std::move(out), "avg_pool_same", {x}, [=](Node<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < bc; ++i) {
      const T* g = self.grad.data() + i * sp;
      T* dst = p.grad.data() + i * sp;
      for (std::size_t z = 0; z < d; ++z) {
        const auto [z0, z1] = window(static_cast<std::ptrdiff_t>(z), rd, d);
        for (std::size_t y = 0; y < h; ++y) {
          const auto [y0, y1] = window(static_cast<std::ptrdiff_t>(y), r, h);
          for (std::size_t xx = 0; xx < w; ++xx) {
            const auto [x0, x1] = window(static_cast<std::ptrdiff_t>(xx), r, w);
            const auto n = (z1 - z0 + 1) * (y1 - y0 + 1) * (x1 - x0 + 1);
            const T share = g[(z * h + y) * w + xx] / static_cast<T>(n);
            for (auto zz = z0; zz <= z1; ++zz)
              for (auto yy = y0; yy <= y1; ++yy)
                for (auto xi = x0; xi <= x1; ++xi) dst[(zz * static_cast<std::ptrdiff_t>(h) + yy) * static_cast<std::ptrdiff_t>(w) + xi] += share;
          }
        }
      }
    }
  });
}

namespace {

template <class T>
Tensor<T> apply_mask(const Tensor<T>& x, std::vector<T> mask, const char* op) {
  std::vector<T> out(x.size());
  const auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * mask[i];
  return make_result<T>(x.shape(), std::move(out), op, {x}, [mask = std::move(mask)](Node<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < mask.size(); ++i) p.grad[i] += mask[i] * self.grad[i];
  });
}

}  // namespace

template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (mode == Mode::Eval || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.size());
  for (auto& m : mask) m = rng.bernoulli(rate) ? T(0) : keep_scale;
  return apply_mask(x, std::move(mask), "dropout");
}

template <class T>
Tensor<T> drop_sample(const Tensor<T>& x, double survival, Mode mode, Rng& rng) {
  if (!(survival > 0.0 && survival <= 1.0)) throw std::invalid_argument("drop_sample: survival must lie in (0, 1]");
  if (mode == Mode::Eval) return x;
  const std::size_t batch = x.dim(0), per = x.size() / batch;
  const T scale = static_cast<T>(1.0 / survival);
  std::vector<T> mask(x.size());
  for (std::size_t n = 0; n < batch; ++n) {
    const T m = rng.bernoulli(survival) ? scale : T(0);
    std::fill_n(mask.begin() + n * per, per, m);
  }
  return apply_mask(x, std::move(mask), "drop_sample");
}

template <class T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [batch, classes]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch axis 0 of " +
                     std::to_string(batch));
  }
  const auto z = logits.data();
  std::vector<T> probs(batch * classes);
  // Accumulate the loss in double so float runs do not lose tiny terms.
  double total = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    }
    const T* row = z.data() + n * classes;
    const T mx = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(row[c] - mx));
    for (std::size_t c = 0; c < classes; ++c) {
      probs[n * classes + c] = static_cast<T>(std::exp(static_cast<double>(row[c] - mx)) / denom);
    }
    total += std::log(denom) - static_cast<double>(row[y] - mx);
  }
  const T loss = static_cast<T>(total / static_cast<double>(batch));
  std::vector<int> ys(labels.begin(), labels.end());
  auto result = make_result<T>(Shape{1}, std::vector<T>{loss}, "softmax_cross_entropy", {logits},
                               [batch, classes, probs, ys = std::move(ys)](Node<T>& self) {
                                 auto& p = *self.parents[0];
                                 const T g = self.grad[0] / static_cast<T>(batch);
                                 for (std::size_t n = 0; n < batch; ++n) {
                                   for (std::size_t c = 0; c < classes; ++c) {
                                     const T onehot = static_cast<int>(c) == ys[n] ? T(1) : T(0);
                                     p.grad[n * classes + c] += g * (probs[n * classes + c] - onehot);
                                   }
                                 }
                               });
  return {std::move(result), std::move(probs)};
}

#define VESSELNET_INSTANTIATE_OPS(T)                                                               \
  template struct BatchNormParams<T>;                                                              \
  template Tensor<T> batch_norm(const Tensor<T>&, BatchNormParams<T>&, Mode, const BatchNormConfig&); \
  template Tensor<T> activation(ActivationKind, const Tensor<T>&);                                  \
  template Tensor<T> global_pool(PoolKind, const Tensor<T>&);                                       \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mean_of(const std::vector<Tensor<T>>&);                                        \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);                    \
  template Tensor<T> avg_pool_same(const Tensor<T>&, std::size_t);                                  \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, Rng&);                                 \
  template Tensor<T> drop_sample(const Tensor<T>&, double, Mode, Rng&);                             \
  template CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);

VESSELNET_INSTANTIATE_OPS(float)
VESSELNET_INSTANTIATE_OPS(double)

}  // namespace vesselnet::nn
