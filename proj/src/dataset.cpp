#include "vesselnet/dataset.hpp"

#include <algorithm>
#include <filesystem>

namespace vesselnet::data {

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d;
  d.sample_shape = sample_shape;
  for (auto i : indices) d.samples.push_back(samples.at(i));
  return d;
}

nn::Tensor<float> make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  nn::Shape shape{indices.size()};
  shape.insert(shape.end(), ds.sample_shape.begin(), ds.sample_shape.end());
  const std::size_t per = nn::shape_volume(ds.sample_shape);
  std::vector<float> values;
  values.reserve(per * indices.size());
  for (auto i : indices) {
    const auto& in = ds.samples.at(i).input;
    if (in.size() != per) throw nn::ShapeError("make_batch: sample '" + ds.samples[i].id + "' has the wrong size");
    values.insert(values.end(), in.begin(), in.end());
  }
  return nn::Tensor<float>(std::move(shape), std::move(values));
}

void PrepConfig::write(KeyValueFile& kv) const {
  kv.set("data.downsample", downsample.to_string());
  kv.set("data.rows", std::to_string(rows));
  kv.set("data.cols", std::to_string(cols));
}

PrepConfig PrepConfig::read(const KeyValueFile& kv) { return read(kv, PrepConfig{}); }

PrepConfig PrepConfig::read(const KeyValueFile& kv, const PrepConfig& fallback) {
  PrepConfig p = fallback;
  if (kv.has("data.downsample")) {
    const std::string& text = kv.get("data.downsample");
    const auto d = Dims::parse(text);
    if (!d) throw ConfigError("key 'data.downsample' expects DxHxW, got '" + text + "'");
    p.downsample = *d;
  }
  const long long rows = kv.get_int("data.rows", static_cast<long long>(p.rows));
  const long long cols = kv.get_int("data.cols", static_cast<long long>(p.cols));
  if (rows < 1 || cols < 1) throw ConfigError("keys 'data.rows' and 'data.cols' must be positive");
  p.rows = static_cast<std::size_t>(rows);
  p.cols = static_cast<std::size_t>(cols);
  return p;
}

std::vector<float> views_input(const MaskVolume& v, const PrepConfig& prep) {
  const auto small = v.dims() == prep.downsample ? v : downsample_mask(v, prep.downsample);
  const auto views = resize_views(orthographic_project(small), prep.rows, prep.cols);
  std::vector<float> out;
  out.reserve(3 * prep.rows * prep.cols);
  for (View view : kAllViews) {
    const auto& px = views.get(view).pixels;
    out.insert(out.end(), px.begin(), px.end());
  }
  return out;
}

std::vector<float> volume_input(const MaskVolume& v, const PrepConfig& prep) {
  const auto small = v.dims() == prep.downsample ? v : downsample_mask(v, prep.downsample);
  return std::vector<float>(small.voxels().begin(), small.voxels().end());
}

nn::Shape sample_shape(InputKind kind, const PrepConfig& prep) {
  if (kind == InputKind::Views) return {3, prep.rows, prep.cols};
  return {1, prep.downsample.depth, prep.downsample.height, prep.downsample.width};
}

namespace {

std::vector<float> prepare(const MaskVolume& v, InputKind kind, const PrepConfig& prep) {
  return kind == InputKind::Views ? views_input(v, prep) : volume_input(v, prep);
}

}  // namespace

Dataset load_dataset(const std::string& dir, InputKind kind, const PrepConfig& prep) {
  Dataset ds;
  ds.sample_shape = sample_shape(kind, prep);
  for (const auto& e : synth::read_manifest(dir)) {
    const auto v = load_volume((std::filesystem::path(dir) / e.filename).string());
    ds.samples.push_back({e.filename, e.filename, e.label, prepare(v, kind, prep)});
  }
  if (ds.samples.empty()) throw FormatError(dir + ": manifest lists no volumes");
  return ds;
}

Dataset synthetic_dataset(const std::vector<synth::SubjectPlan>& plans, Dims canvas, InputKind kind,
                          const PrepConfig& prep) {
  Dataset ds;
  ds.sample_shape = sample_shape(kind, prep);
  for (const auto& p : plans) {
    const auto subject = synth::render(p, canvas);
    const std::string id = synth::subject_filename(p.index);
    ds.samples.push_back({id, id, static_cast<int>(p.label), prepare(subject.volume, kind, prep)});
  }
  return ds;
}

Dataset replicate_view(const Dataset& ds, View view) {
  if (ds.sample_shape.size() != 3 || ds.sample_shape[0] != 3) {
    throw nn::ShapeError("replicate_view: samples are not view triplets");
  }
  const std::size_t slot = static_cast<std::size_t>(std::find(kAllViews.begin(), kAllViews.end(), view) - kAllViews.begin());
  const std::size_t hw = ds.sample_shape[1] * ds.sample_shape[2];
  Dataset out = ds;
  for (auto& s : out.samples) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (k != slot) std::copy_n(s.input.begin() + slot * hw, hw, s.input.begin() + k * hw);
    }
  }
  return out;
}

}  // namespace vesselnet::data
