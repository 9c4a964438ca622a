#include "vesselnet/volume.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vesselnet/io.hpp"

namespace vesselnet {

std::string Dims::to_string() const {
  return std::to_string(depth) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

std::optional<Dims> Dims::parse(const std::string& text) {
  std::uint32_t d[3];
  const char* ptr = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 3; ++i) {
    auto r = std::from_chars(ptr, end, d[i]);
    if (r.ec != std::errc() || d[i] == 0) return std::nullopt;
    if (i < 2 && (r.ptr == end || *r.ptr != 'x')) return std::nullopt;
    if (i == 2 && r.ptr != end) return std::nullopt;
    ptr = r.ptr + 1;
  }
  return Dims{d[0], d[1], d[2]};
}

namespace {

void require_positive(const Dims& d, const char* what) {
  if (d.depth == 0 || d.height == 0 || d.width == 0) {
    throw std::invalid_argument(std::string(what) + ": dims must all be >= 1, got " + d.to_string());
  }
}

struct Cell {
  std::size_t begin, end;
};

std::vector<Cell> partition(std::size_t n, std::size_t m) {
  std::vector<Cell> cells(m);
  for (std::size_t o = 0; o < m; ++o) {
    const std::size_t b = o * n / m;
    cells[o] = {b, std::max(b + 1, (o + 1) * n / m)};
  }
  return cells;
}

}  // namespace

MaskVolume::MaskVolume(Dims dims) : dims_(dims) {
  require_positive(dims, "MaskVolume");
  voxels_.assign(dims.count(), 0);
}

MaskVolume::MaskVolume(Dims dims, std::vector<std::uint8_t> voxels) : dims_(dims), voxels_(std::move(voxels)) {
  require_positive(dims, "MaskVolume");
  if (voxels_.size() != dims.count()) {
    throw std::invalid_argument("MaskVolume: " + std::to_string(voxels_.size()) + " voxels for dims " +
                                dims.to_string());
  }
  for (auto v : voxels_) {
    if (v > 1) throw std::invalid_argument("MaskVolume: voxel value " + std::to_string(v) + " is not binary");
  }
}

std::size_t MaskVolume::count_set() const {
  std::size_t n = 0;
  for (auto v : voxels_) n += v;
  return n;
}

std::size_t Image::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](float v) { return v != 0.0f; }));
}

const char* view_name(View v) {
  switch (v) {
    case View::Frontal:
      return "frontal";
    case View::Transverse:
      return "transverse";
    case View::Sagittal:
      return "sagittal";
  }
  return "?";
}

View parse_view(const std::string& name) {
  for (View v : kAllViews) {
    if (name == view_name(v)) return v;
  }
  throw std::invalid_argument("unknown view '" + name + "' (expected frontal, transverse or sagittal)");
}

const Image& ViewTriplet::get(View v) const {
  switch (v) {
    case View::Frontal:
      return frontal;
    case View::Transverse:
      return transverse;
    default:
      return sagittal;
  }
}

Image& ViewTriplet::get(View v) { return const_cast<Image&>(std::as_const(*this).get(v)); }

MaskVolume downsample_mask(const MaskVolume& v, Dims target) {
  require_positive(target, "downsample_mask");
  const Dims src = v.dims();
  const auto cd = partition(src.depth, target.depth);
  const auto ch = partition(src.height, target.height);
  const auto cw = partition(src.width, target.width);
  const auto in = v.voxels();

  // Separable OR: width, then height, then depth.
  std::vector<std::uint8_t> a(std::size_t(src.depth) * src.height * target.width, 0);
  for (std::size_t row = 0; row < std::size_t(src.depth) * src.height; ++row) {
    const std::uint8_t* s = in.data() + row * src.width;
    std::uint8_t* d = a.data() + row * target.width;
    for (std::size_t o = 0; o < target.width; ++o) {
      std::uint8_t m = 0;
      for (std::size_t i = cw[o].begin; i < cw[o].end; ++i) m |= s[i];
      d[o] = m;
    }
  }
  std::vector<std::uint8_t> b(std::size_t(src.depth) * target.height * target.width, 0);
  for (std::size_t z = 0; z < src.depth; ++z) {
    for (std::size_t o = 0; o < target.height; ++o) {
      std::uint8_t* d = b.data() + (z * target.height + o) * target.width;
      for (std::size_t i = ch[o].begin; i < ch[o].end; ++i) {
        const std::uint8_t* s = a.data() + (z * src.height + i) * target.width;
        for (std::size_t x = 0; x < target.width; ++x) d[x] |= s[x];
      }
    }
  }
  std::vector<std::uint8_t> c(target.count(), 0);
  const std::size_t plane = std::size_t(target.height) * target.width;
  for (std::size_t o = 0; o < target.depth; ++o) {
    std::uint8_t* d = c.data() + o * plane;
    for (std::size_t i = cd[o].begin; i < cd[o].end; ++i) {
      const std::uint8_t* s = b.data() + i * plane;
      for (std::size_t x = 0; x < plane; ++x) d[x] |= s[x];
    }
  }
  MaskVolume out(target, std::move(c));
  out.meta = v.meta;
  return out;
}

FloatVolume downsample_mean(const MaskVolume& v, Dims target) {
  require_positive(target, "downsample_mean");
  const Dims src = v.dims();
  const auto cd = partition(src.depth, target.depth);
  const auto ch = partition(src.height, target.height);
  const auto cw = partition(src.width, target.width);
  FloatVolume out{target, std::vector<float>(target.count(), 0.0f)};
  for (std::size_t z = 0; z < target.depth; ++z)
    for (std::size_t y = 0; y < target.height; ++y)
      for (std::size_t x = 0; x < target.width; ++x) {
        std::size_t set = 0, total = 0;
        for (std::size_t i = cd[z].begin; i < cd[z].end; ++i)
          for (std::size_t j = ch[y].begin; j < ch[y].end; ++j)
            for (std::size_t k = cw[x].begin; k < cw[x].end; ++k) {
              set += v.at(i, j, k);
              ++total;
            }
        out.values[(z * target.height + y) * target.width + x] = static_cast<float>(set) / static_cast<float>(total);
      }
  return out;
}

ViewTriplet orthographic_project(const MaskVolume& v) {
  const Dims d = v.dims();
  ViewTriplet t{Image(d.height, d.width), Image(d.depth, d.width), Image(d.depth, d.height)};
  const auto vox = v.voxels();
  for (std::size_t z = 0; z < d.depth; ++z) {
    for (std::size_t y = 0; y < d.height; ++y) {
      const std::uint8_t* row = vox.data() + (z * d.height + y) * d.width;
      float* fr = t.frontal.pixels.data() + y * d.width;
      float* tr = t.transverse.pixels.data() + z * d.width;
      bool any = false;
      for (std::size_t x = 0; x < d.width; ++x) {
        if (row[x]) {
          fr[x] = 1.0f;
          tr[x] = 1.0f;
          any = true;
        }
      }
      if (any) t.sagittal.at(z, y) = 1.0f;
    }
  }
  return t;
}

Image resize_image(const Image& img, std::size_t rows, std::size_t cols, ResizeMethod method) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("resize_image: target must be at least 1x1");
  if (img.rows == 0 || img.cols == 0) throw std::invalid_argument("resize_image: empty source image");
  if (rows == img.rows && cols == img.cols) return img;
  Image out(rows, cols);
  if (method == ResizeMethod::Nearest) {
    std::vector<std::size_t> cmap(cols);
    for (std::size_t c = 0; c < cols; ++c) cmap[c] = std::min(img.cols - 1, (2 * c + 1) * img.cols / (2 * cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t sr = std::min(img.rows - 1, (2 * r + 1) * img.rows / (2 * rows));
      for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = img.at(sr, cmap[c]);
    }
    return out;
  }
  auto source_coord = [](std::size_t o, std::size_t dst, std::size_t src, std::size_t& i0, std::size_t& i1,
                         double& frac) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(src) / static_cast<double>(dst) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, src - 1);
    frac = s - static_cast<double>(i0);
  };
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t r0, r1;
    double fr;
    source_coord(r, rows, img.rows, r0, r1, fr);
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t c0, c1;
      double fc;
      source_coord(c, cols, img.cols, c0, c1, fc);
      const double top = (1 - fc) * img.at(r0, c0) + fc * img.at(r0, c1);
      const double bot = (1 - fc) * img.at(r1, c0) + fc * img.at(r1, c1);
      out.at(r, c) = static_cast<float>((1 - fr) * top + fr * bot);
    }
  }
  return out;
}

ViewTriplet resize_views(const ViewTriplet& t, std::size_t rows, std::size_t cols, ResizeMethod method) {
  return {resize_image(t.frontal, rows, cols, method), resize_image(t.transverse, rows, cols, method),
          resize_image(t.sagittal, rows, cols, method)};
}

ViewTriplet replicate_view(View view, const ViewTriplet& t) {
  const Image& img = t.get(view);
  return {img, img, img};
}

std::string encode_volume(const MaskVolume& v) {
  std::string out = "VMK1";
  auto put_u32 = [&](std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xffu));
  };
  put_u32(v.dims().depth);
  put_u32(v.dims().height);
  put_u32(v.dims().width);
  const auto vox = v.voxels();
  out.append(reinterpret_cast<const char*>(vox.data()), vox.size());
  return out;
}

MaskVolume decode_volume(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "VMK1") != 0) {
    throw FormatError(origin + ": not a VMK1 volume (bad magic)");
  }
  auto get_u32 = [&](std::size_t off) {
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return x;
  };
  const Dims d{get_u32(4), get_u32(8), get_u32(12)};
  if (d.depth == 0 || d.height == 0 || d.width == 0) throw FormatError(origin + ": zero dimension in header");
  if (bytes.size() != 16 + d.count()) {
    throw FormatError(origin + ": payload holds " + std::to_string(bytes.size() - 16) + " bytes, header " +
                      d.to_string() + " needs " + std::to_string(d.count()));
  }
  std::vector<std::uint8_t> vox(bytes.begin() + 16, bytes.end());
  for (auto x : vox) {
    if (x > 1) throw FormatError(origin + ": voxel byte " + std::to_string(x) + " is not 0 or 1");
  }
  return MaskVolume(d, std::move(vox));
}

void save_volume(const std::string& path, const MaskVolume& v) { write_file_atomic(path, encode_volume(v)); }

MaskVolume load_volume(const std::string& path) {
  auto v = decode_volume(read_file(path), path);
  v.meta = path;
  return v;
}

void write_pgm(const std::string& path, const Image& img) {
  std::string out = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (float v : img.pixels) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f))));
  }
  write_file_atomic(path, out);
}

Image read_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  std::size_t cols = 0, rows = 0, maxval = 0;
  in >> magic;
  auto skip_comments = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
  };
  skip_comments();
  in >> cols;
  skip_comments();
  in >> rows;
  skip_comments();
  in >> maxval;
  if (magic != "P5" || !in || cols == 0 || rows == 0 || maxval == 0 || maxval > 255) {
    throw FormatError(path + ": not an 8-bit binary PGM");
  }
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() != offset + rows * cols) throw FormatError(path + ": PGM payload size mismatch");
  Image img(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    img.pixels[i] = static_cast<float>(static_cast<unsigned char>(bytes[offset + i])) / static_cast<float>(maxval);
  }
  return img;
}

}  // namespace vesselnet
