#include "vesselnet/models.hpp"

#include <charconv>
#include <sstream>

namespace vesselnet::models {

using nn::BatchNormParams;
using nn::ConvSpec;
using nn::Mode;
using nn::Shape;
using nn::shape_string;
using nn::Tensor;

namespace {

void require(bool ok, const std::string& constraint) {
  if (!ok) throw ConfigError("model spec violates " + constraint);
}

std::string key_value(const std::string& key, std::size_t v) { return key + " = " + std::to_string(v); }

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text, char sep) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = text.find(sep, pos);
    const std::string item = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || item.empty()) {
      throw ConfigError("key '" + key + "': cannot parse '" + text + "'");
    }
    out.push_back(v);
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

std::size_t get_count(const KeyValueFile& kv, const std::string& key, std::size_t fallback) {
  const long long v = kv.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("key '" + key + "' must not be negative");
  return static_cast<std::size_t>(v);
}

struct ConvBn {
  ConvSpec spec;
  Tensor<float> weight;
  BatchNormParams<float> bn;

  static ConvBn make(const ConvSpec& spec, Rng& rng) {
    ConvBn c;
    c.spec = spec;
    c.weight = nn::kaiming_uniform<float>(spec.weight_shape(), spec.weight_count() / spec.out_channels, rng);
    c.bn = BatchNormParams<float>::make(spec.out_channels);
    return c;
  }

  void register_into(nn::ParameterSet<float>& set, const std::string& prefix) const {
    set.add(prefix + ".weight", weight);
    set.add_batch_norm(prefix + ".bn", bn);
  }

  Tensor<float> operator()(const Tensor<float>& x, nn::ActivationKind act, Mode mode) {
    return nn::activation(act, nn::batch_norm(nn::conv_nd(x, spec, weight), bn, mode));
  }
};

struct DenseLayer {
  Tensor<float> weight;
  Tensor<float> bias;

  static DenseLayer make(std::size_t in, std::size_t out, Rng& rng) {
    return {nn::kaiming_uniform<float>(Shape{in, out}, in, rng), nn::zeros_param<float>(Shape{out})};
  }
  void register_into(nn::ParameterSet<float>& set, const std::string& prefix) const {
    set.add(prefix + ".weight", weight);
    set.add(prefix + ".bias", bias);
  }
  Tensor<float> operator()(const Tensor<float>& x) const { return nn::dense(x, weight, bias); }
};

class EfficientNet3D final : public Classifier {
 public:
  EfficientNet3D(const Model3DSpec& spec, Rng& rng) : spec_(spec), config_(spec), blocks_(spec.blocks()) {
    stem_ = ConvBn::make(spec.stem(), rng);
    stem_.register_into(params_, "stem");
    std::size_t stage = 0, index = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      block_params_.push_back(nn::MBConvParams<float>::make(blocks_[b], rng));
      block_params_.back().register_into(params_,
                                         "stages." + std::to_string(stage) + "." + std::to_string(index));
      if (++index == spec.stages[stage].repeats) {
        ++stage;
        index = 0;
      }
    }
    head_ = ConvBn::make(spec.head(), rng);
    head_.register_into(params_, "head");
    classifier_ = DenseLayer::make(spec.head_channels, spec.classes, rng);
    classifier_.register_into(params_, "classifier");
  }

  const ModelSpec& spec() const override { return spec_; }
  Shape sample_shape() const override { return {1, config_.input.depth, config_.input.height, config_.input.width}; }

  Tensor<float> forward(const Tensor<float>& input, Mode mode, Rng& rng) override {
    const Shape want = sample_shape();
    if (input.rank() != 5 || !std::equal(want.begin(), want.end(), input.shape().begin() + 1)) {
      throw nn::ShapeError("efficientnet3d: input " + shape_string(input.shape()) + " does not match [B, " +
                           shape_string(want) + "]");
    }
    auto h = stem_(input, nn::ActivationKind::SiLU, mode);
    for (std::size_t b = 0; b < blocks_.size(); ++b) h = nn::mbconv(h, blocks_[b], block_params_[b], mode, rng);
    h = head_(h, nn::ActivationKind::SiLU, mode);
    return classifier_(nn::global_pool(nn::PoolKind::Avg, h));
  }

 private:
  ModelSpec spec_;
  Model3DSpec config_;
  std::vector<nn::MBConvSpec> blocks_;
  ConvBn stem_;
  std::vector<nn::MBConvParams<float>> block_params_;
  ConvBn head_;
  DenseLayer classifier_;
};

struct InceptionA {
  ConvBn b1, b2a, b2b, b3a, b3b, b3c, b4;

  static InceptionA make(std::size_t channels, Rng& rng) {
    const std::size_t w = channels / 4;
    InceptionA a;
    a.b1 = ConvBn::make(ConvSpec::cube(2, channels, w, 1), rng);
    a.b2a = ConvBn::make(ConvSpec::cube(2, channels, w, 1), rng);
    a.b2b = ConvBn::make(ConvSpec::cube(2, w, w, 3), rng);
    a.b3a = ConvBn::make(ConvSpec::cube(2, channels, w, 1), rng);
    a.b3b = ConvBn::make(ConvSpec::cube(2, w, w, 3), rng);
    a.b3c = ConvBn::make(ConvSpec::cube(2, w, w, 3), rng);
    a.b4 = ConvBn::make(ConvSpec::cube(2, channels, w, 1), rng);
    return a;
  }

  void register_into(nn::ParameterSet<float>& set, const std::string& prefix) const {
    b1.register_into(set, prefix + ".b1");
    b2a.register_into(set, prefix + ".b2a");
    b2b.register_into(set, prefix + ".b2b");
    b3a.register_into(set, prefix + ".b3a");
    b3b.register_into(set, prefix + ".b3b");
    b3c.register_into(set, prefix + ".b3c");
    b4.register_into(set, prefix + ".b4");
  }

  Tensor<float> operator()(const Tensor<float>& x, Mode mode) {
    constexpr auto r = nn::ActivationKind::ReLU;
    auto y1 = b1(x, r, mode);
    auto y2 = b2b(b2a(x, r, mode), r, mode);
    auto y3 = b3c(b3b(b3a(x, r, mode), r, mode), r, mode);
    auto y4 = b4(nn::avg_pool_same(x, 3), r, mode);
    return nn::concat_channels<float>({y1, y2, y3, y4});
  }
};

struct FeatureExtractor {
  std::vector<ConvBn> convs;
  std::vector<InceptionA> blocks;

  static FeatureExtractor make(const Model2DSpec& spec, Rng& rng) {
    FeatureExtractor f;
    std::size_t in = 1;
    for (std::size_t i = 0; i < spec.n; ++i) {
      f.convs.push_back(ConvBn::make(ConvSpec::cube(2, in, spec.conv_filters(i), 3), rng));
      in = spec.conv_filters(i);
    }
    for (std::size_t j = 0; j < spec.p; ++j) f.blocks.push_back(InceptionA::make(in, rng));
    return f;
  }

  void register_into(nn::ParameterSet<float>& set, const std::string& prefix) const {
    for (std::size_t i = 0; i < convs.size(); ++i) convs[i].register_into(set, prefix + ".conv." + std::to_string(i));
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      blocks[j].register_into(set, prefix + ".inception." + std::to_string(j));
    }
  }

  Tensor<float> operator()(const Tensor<float>& x, Mode mode) {
    Tensor<float> h = x;
    for (auto& c : convs) h = c(h, nn::ActivationKind::ReLU, mode);
    for (auto& b : blocks) h = b(h, mode);
    return h;
  }
};

class MultiViewCnn2D final : public Classifier {
 public:
  MultiViewCnn2D(const Model2DSpec& spec, Rng& rng) : spec_(spec), config_(spec) {
    const std::size_t extractors = spec.feb_shared ? 1 : 3;
    for (std::size_t e = 0; e < extractors; ++e) {
      febs_.push_back(FeatureExtractor::make(spec, rng));
      febs_.back().register_into(params_, spec.feb_shared ? "feb" : "feb." + std::string(view_name(kAllViews[e])));
    }
    std::size_t in = spec.feature_channels();
    for (std::size_t i = 0; i < spec.m; ++i) {
      hidden_.push_back(DenseLayer::make(in, spec.hidden_width(), rng));
      hidden_.back().register_into(params_, "dense." + std::to_string(i));
      in = spec.hidden_width();
    }
    classifier_ = DenseLayer::make(in, spec.classes, rng);
    classifier_.register_into(params_, "classifier");
  }

  const ModelSpec& spec() const override { return spec_; }
  Shape sample_shape() const override { return {3, config_.rows, config_.cols}; }

  Tensor<float> forward(const Tensor<float>& input, Mode mode, Rng& rng) override {
    if (input.rank() != 4) {
      throw nn::ShapeError("cnn2d: input " + shape_string(input.shape()) + " is not [B, 3, rows, cols]");
    }
    if (input.dim(1) != 3) {
      throw nn::ShapeError("cnn2d: expected exactly 3 view images per sample, got " + std::to_string(input.dim(1)));
    }
    if (input.dim(2) != config_.rows || input.dim(3) != config_.cols) {
      throw nn::ShapeError("cnn2d: view images are " + std::to_string(input.dim(2)) + "x" +
                           std::to_string(input.dim(3)) + ", model expects " + std::to_string(config_.rows) + "x" +
                           std::to_string(config_.cols));
    }
    std::vector<Tensor<float>> features;
    for (std::size_t v = 0; v < 3; ++v) {
      features.push_back(febs_[config_.feb_shared ? 0 : v](nn::slice_channels(input, v, 1), mode));
    }
    auto h = nn::global_pool(nn::PoolKind::Max, nn::mean_of(features));
    for (auto& d : hidden_) h = nn::dropout(nn::relu(d(h)), config_.dropout, mode, rng);
    return classifier_(h);
  }

 private:
  ModelSpec spec_;
  Model2DSpec config_;
  std::vector<FeatureExtractor> febs_;
  std::vector<DenseLayer> hidden_;
  DenseLayer classifier_;
};

}  // namespace

Model3DSpec Model3DSpec::reduced() {
  Model3DSpec s;
  s.stem_channels = 8;
  s.stages = {{8, 1, 3, 1, 1}, {16, 1, 3, 2, 6}};
  s.head_channels = 32;
  s.input = Dims{32, 16, 32};
  return s;
}

void Model3DSpec::validate() const {
  require(stem_channels >= 1, "stem channels >= 1");
  require(stem_kernel % 2 == 1, "odd stem kernel");
  require(stem_stride >= 1, "stem stride >= 1");
  require(!stages.empty(), "at least one stage");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::string tag = "model.stage." + std::to_string(i + 1);
    require(s.out_channels >= 1, tag + " out channels >= 1");
    require(s.repeats >= 1, tag + " repeats >= 1");
    require(s.kernel % 2 == 1, tag + " odd kernel");
    require(s.stride >= 1, tag + " stride >= 1");
    require(i == 0 ? s.expansion == 1 : s.expansion == 6,
            tag + (i == 0 ? " expansion = 1 (first stage)" : " expansion = 6 (later stages)"));
  }
  require(head_channels >= 1, "head channels >= 1");
  require(classes >= 2, "classes >= 2");
  require(input.count() > 0, "nonzero input dims");
  require(se_reduction >= 1, "se_reduction >= 1");
  require(survival > 0.0 && survival <= 1.0, "0 < survival <= 1");
  std::vector<std::size_t> spatial{input.depth, input.height, input.width};
  try {
    spatial = stem().output_spatial(spatial);
    for (const auto& b : blocks()) spatial = b.depthwise_conv().output_spatial(spatial);
  } catch (const nn::ShapeError& e) {
    throw ConfigError("model spec violates: input " + input.to_string() + " too small for the stride chain (" +
                      e.what() + ")");
  }
}

ConvSpec Model3DSpec::stem() const { return ConvSpec::cube(3, 1, stem_channels, stem_kernel, stem_stride); }

std::vector<nn::MBConvSpec> Model3DSpec::blocks() const {
  std::vector<nn::MBConvSpec> out;
  std::size_t in = stem_channels;
  for (const auto& s : stages) {
    for (std::size_t r = 0; r < s.repeats; ++r) {
      auto b = nn::MBConvSpec::cube(3, in, s.out_channels, s.expansion, s.kernel, r == 0 ? s.stride : 1);
      b.se_reduction = se_reduction;
      b.survival = survival;
      out.push_back(b);
      in = s.out_channels;
    }
  }
  return out;
}

ConvSpec Model3DSpec::head() const {
  return ConvSpec::cube(3, stages.back().out_channels, head_channels, 1, 1, 0);
}

void Model2DSpec::validate() const {
  require(m >= 1 && m <= 10, key_value("model.m", m) + " (needs 1 <= m <= 10)");
  require(n >= 1 && n <= 10, key_value("model.n", n) + " (needs 1 <= n <= 10)");
  require(p >= 1 && p <= 10, key_value("model.p", p) + " (needs 1 <= p <= 10)");
  require(dropout >= 0.0 && dropout < 1.0, "0 <= model.dropout < 1");
  require(rows >= 1 && cols >= 1, "nonzero view size");
  require(classes >= 2, "classes >= 2");
}

std::size_t Model2DSpec::conv_filters(std::size_t layer) const {
  return filters == FilterMode::Constant ? 4 * (n + 1) : 4 * (layer + 2);
}

std::string model_kind(const ModelSpec& spec) {
  return std::holds_alternative<Model3DSpec>(spec) ? "efficientnet3d" : "cnn2d";
}

void write_spec(const ModelSpec& spec, KeyValueFile& kv) {
  kv.set("model.kind", model_kind(spec));
  if (const auto* s = std::get_if<Model3DSpec>(&spec)) {
    kv.set("model.stem", std::to_string(s->stem_channels) + "," + std::to_string(s->stem_kernel) + "," +
                             std::to_string(s->stem_stride));
    for (std::size_t i = 0; i < s->stages.size(); ++i) {
      const auto& st = s->stages[i];
      kv.set("model.stage." + std::to_string(i + 1),
             std::to_string(st.out_channels) + "," + std::to_string(st.repeats) + "," + std::to_string(st.kernel) +
                 "," + std::to_string(st.stride) + "," + std::to_string(st.expansion));
    }
    kv.set("model.head", std::to_string(s->head_channels));
    kv.set("model.input", std::to_string(s->input.depth) + "x" + std::to_string(s->input.height) + "x" +
                              std::to_string(s->input.width));
    kv.set("model.classes", std::to_string(s->classes));
    kv.set("model.se_reduction", std::to_string(s->se_reduction));
    kv.set("model.survival", format_number(s->survival));
  } else {
    const auto& t = std::get<Model2DSpec>(spec);
    kv.set("model.m", std::to_string(t.m));
    kv.set("model.n", std::to_string(t.n));
    kv.set("model.p", std::to_string(t.p));
    kv.set("model.feb_shared", t.feb_shared ? "true" : "false");
    kv.set("model.filters", t.filters == FilterMode::Constant ? "constant" : "indexed");
    kv.set("model.dropout", format_number(t.dropout));
    kv.set("model.rows", std::to_string(t.rows));
    kv.set("model.cols", std::to_string(t.cols));
    kv.set("model.classes", std::to_string(t.classes));
  }
}

ModelSpec read_spec(const KeyValueFile& kv) {
  const std::string kind = kv.get_or("model.kind", "");
  if (kind == "efficientnet3d") {
    Model3DSpec s;
    if (kv.has("model.stem")) {
      auto v = parse_list("model.stem", kv.get("model.stem"), ',');
      if (v.size() != 3) throw ConfigError("key 'model.stem' expects channels,kernel,stride");
      s.stem_channels = v[0];
      s.stem_kernel = v[1];
      s.stem_stride = v[2];
    }
    if (kv.has("model.stage.1")) {
      s.stages.clear();
      for (std::size_t i = 1; kv.has("model.stage." + std::to_string(i)); ++i) {
        const std::string key = "model.stage." + std::to_string(i);
        auto v = parse_list(key, kv.get(key), ',');
        if (v.size() != 5) throw ConfigError("key '" + key + "' expects out,repeats,kernel,stride,expansion");
        s.stages.push_back({v[0], v[1], v[2], v[3], v[4]});
      }
    }
    for (const auto& key : kv.keys()) {
      if (key.rfind("model.stage.", 0) == 0) {
        const std::string idx = key.substr(12);
        const std::size_t i = parse_list(key, idx, ',').at(0);
        if (i == 0 || i > s.stages.size()) throw ConfigError("key '" + key + "': stage numbers must run 1, 2, ...");
      }
    }
    s.head_channels = get_count(kv, "model.head", s.head_channels);
    if (kv.has("model.input")) {
      auto v = parse_list("model.input", kv.get("model.input"), 'x');
      if (v.size() != 3) throw ConfigError("key 'model.input' expects DxHxW");
      s.input = Dims{static_cast<std::uint32_t>(v[0]), static_cast<std::uint32_t>(v[1]),
                     static_cast<std::uint32_t>(v[2])};
    }
    s.classes = get_count(kv, "model.classes", s.classes);
    s.se_reduction = get_count(kv, "model.se_reduction", s.se_reduction);
    s.survival = kv.get_double("model.survival", s.survival);
    s.validate();
    return s;
  }
  if (kind == "cnn2d") {
    Model2DSpec t;
    t.m = get_count(kv, "model.m", t.m);
    t.n = get_count(kv, "model.n", t.n);
    t.p = get_count(kv, "model.p", t.p);
    t.feb_shared = kv.get_bool("model.feb_shared", t.feb_shared);
    const std::string f = kv.get_or("model.filters", "constant");
    if (f == "constant") t.filters = FilterMode::Constant;
    else if (f == "indexed") t.filters = FilterMode::Indexed;
    else throw ConfigError("key 'model.filters' expects constant or indexed, got '" + f + "'");
    t.dropout = kv.get_double("model.dropout", t.dropout);
    t.rows = get_count(kv, "model.rows", t.rows);
    t.cols = get_count(kv, "model.cols", t.cols);
    t.classes = get_count(kv, "model.classes", t.classes);
    t.validate();
    return t;
  }
  throw ConfigError("key 'model.kind' must be efficientnet3d or cnn2d, got '" + kind + "'");
}

std::set<std::string> spec_keys() {
  return {"model.kind",    "model.stem",    "model.stage.", "model.head",       "model.input",
          "model.classes", "model.se_reduction", "model.survival", "model.m",  "model.n",
          "model.p",       "model.feb_shared",   "model.filters",  "model.dropout", "model.rows",
          "model.cols"};
}

std::unique_ptr<Classifier> build_model(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x6d6f64656cULL));
  if (const auto* s = std::get_if<Model3DSpec>(&spec)) {
    s->validate();
    return std::make_unique<EfficientNet3D>(*s, rng);
  }
  const auto& t = std::get<Model2DSpec>(spec);
  t.validate();
  return std::make_unique<MultiViewCnn2D>(t, rng);
}

}  // namespace vesselnet::models
