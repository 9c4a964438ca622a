#pragma once

// Binary vessel-mask volumes and their orthographic projections.
//
// Axis convention: depth (D) is the axial A-scan direction, height (H) is
// the B-scan index, width (W) is lateral. Voxels are stored row-major with
// width fastest: index = (d * H + h) * W + w.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vesselnet {

struct Dims {
  std::uint32_t depth = 1;
  std::uint32_t height = 1;
  std::uint32_t width = 1;

  std::size_t count() const { return std::size_t(depth) * height * width; }
  bool operator==(const Dims&) const = default;
  std::string to_string() const;
  // "DxHxW" with every extent >= 1; std::nullopt otherwise.
  static std::optional<Dims> parse(const std::string& text);
};

class MaskVolume {
 public:
  MaskVolume() : MaskVolume(Dims{}) {}
  explicit MaskVolume(Dims dims);
  // Throws std::invalid_argument unless every value is 0 or 1.
  MaskVolume(Dims dims, std::vector<std::uint8_t> voxels);

  const Dims& dims() const { return dims_; }
  std::size_t index(std::size_t d, std::size_t h, std::size_t w) const {
    return (d * dims_.height + h) * dims_.width + w;
  }
  bool at(std::size_t d, std::size_t h, std::size_t w) const { return voxels_[index(d, h, w)] != 0; }
  void set(std::size_t d, std::size_t h, std::size_t w, bool on = true) { voxels_[index(d, h, w)] = on ? 1 : 0; }
  void flip(std::size_t i) { voxels_[i] ^= 1u; }

  std::span<const std::uint8_t> voxels() const { return voxels_; }
  std::size_t count_set() const;
  bool empty() const { return count_set() == 0; }

  // Free-form provenance (not serialized).
  std::string meta;

  bool operator==(const MaskVolume& o) const { return dims_ == o.dims_ && voxels_ == o.voxels_; }

 private:
  Dims dims_;
  std::vector<std::uint8_t> voxels_;
};

// Gray-level volume produced by mean downsampling.
struct FloatVolume {
  Dims dims;
  std::vector<float> values;
};

struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> pixels;  // row-major, values in [0, 1]

  Image() = default;
  Image(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), pixels(r * c, fill) {}
  float at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
  float& at(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }
  std::size_t count_nonzero() const;
  bool operator==(const Image&) const = default;
};

enum class View { Frontal, Transverse, Sagittal };

const char* view_name(View v);
// Accepts "frontal", "transverse", "sagittal"; throws std::invalid_argument.
View parse_view(const std::string& name);
inline constexpr std::array<View, 3> kAllViews{View::Frontal, View::Transverse, View::Sagittal};

struct ViewTriplet {
  Image frontal;     // H x W, collapsed along depth (enface)
  Image transverse;  // D x W, collapsed along height
  Image sagittal;    // D x H, collapsed along width

  const Image& get(View v) const;
  Image& get(View v);
  bool operator==(const ViewTriplet&) const = default;
};

inline constexpr std::size_t kDefaultViewRows = 200;
inline constexpr std::size_t kDefaultViewCols = 400;

// Each output voxel is the max (logical OR) over its axis-proportional
// preimage cell [o*n/m, max(o*n/m + 1, (o+1)*n/m)). When a target axis is
// larger than the source this degenerates to nearest-neighbor upsampling.
MaskVolume downsample_mask(const MaskVolume& v, Dims target);
// Same partition, averaging instead of OR; for gray-level consumers.
FloatVolume downsample_mean(const MaskVolume& v, Dims target);

// Max along each collapsed ray; no resizing.
ViewTriplet orthographic_project(const MaskVolume& v);

enum class ResizeMethod { Nearest, Bilinear };

// Nearest samples source pixel floor((r + 0.5) * src / dst); bilinear uses
// half-pixel centers with edge clamping.
Image resize_image(const Image& img, std::size_t rows, std::size_t cols,
                   ResizeMethod method = ResizeMethod::Nearest);
ViewTriplet resize_views(const ViewTriplet& t, std::size_t rows, std::size_t cols,
                         ResizeMethod method = ResizeMethod::Nearest);

// All three slots hold the named view (single-view ablation input).
ViewTriplet replicate_view(View view, const ViewTriplet& t);

// VMK1: "VMK1", u32le D, u32le H, u32le W, then D*H*W bytes of {0,1}.
std::string encode_volume(const MaskVolume& v);
MaskVolume decode_volume(const std::string& bytes, const std::string& origin = "<buffer>");
void save_volume(const std::string& path, const MaskVolume& v);
MaskVolume load_volume(const std::string& path);

// Binary PGM (P5, maxval 255); pixel = round(value * 255).
void write_pgm(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);

}  // namespace vesselnet
