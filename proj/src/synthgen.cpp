#include "vesselnet/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>

namespace vesselnet::synth {

namespace {

constexpr double kSurfaceFraction = 0.3;
constexpr double kTrunkFraction = 0.3;
constexpr double kLengthFraction = 0.25;
constexpr double kLengthDecay = 0.7;
constexpr double kStep = 0.5;

[[noreturn]] void reject(const std::string& name, double value, const std::string& why) {
  throw std::invalid_argument("synthgen: " + name + " = " + format_number(value) + " " + why);
}

struct Canvas {
  Dims dims;
  double surface_z;
  double center_h;
  double center_w;
  std::size_t trunk_length;

  explicit Canvas(Dims d)
      : dims(d),
        surface_z(std::floor(kSurfaceFraction * d.depth)),
        center_h(std::floor(d.height / 2.0)),
        center_w(std::floor(d.width / 2.0)),
        trunk_length(static_cast<std::size_t>(std::lround(kTrunkFraction * d.depth))) {}
};

class TreeRasterizer {
 public:
  TreeRasterizer(const PhenotypeParams& p, const Canvas& c, MaskVolume& v, Rng& rng)
      : p_(p), c_(c), v_(v), rng_(rng) {}

  double surface(double h, double w) const {
    const double r2 = (h - c_.center_h) * (h - c_.center_h) + (w - c_.center_w) * (w - c_.center_w);
    return c_.surface_z + p_.cup_depth * std::max(0.0, 1.0 - r2 / (p_.cup_radius * p_.cup_radius));
  }

  void trunk(double th, double tw) {
    const double r = p_.root_diameter / 2.0;
    const auto top = static_cast<std::size_t>(std::lround(surface(th, tw)));
    const auto h0 = static_cast<std::size_t>(std::max(0.0, std::floor(th - r)));
    const auto h1 = static_cast<std::size_t>(std::min<double>(c_.dims.height - 1, std::ceil(th + r)));
    const auto w0 = static_cast<std::size_t>(std::max(0.0, std::floor(tw - r)));
    const auto w1 = static_cast<std::size_t>(std::min<double>(c_.dims.width - 1, std::ceil(tw + r)));
    for (std::size_t z = top; z < top + c_.trunk_length && z < c_.dims.depth; ++z)
      for (std::size_t h = h0; h <= h1; ++h)
        for (std::size_t w = w0; w <= w1; ++w) {
          const double dh = h - th, dw = w - tw;
          if (dh * dh + dw * dw <= r * r) v_.set(z, h, w);
        }
  }

  void branch(double h, double w, double theta, int generation) {
    if (generation > p_.branch_depth) return;
    const double radius = std::max(0.5, p_.root_diameter * std::pow(p_.taper_ratio, generation) / 2.0);
    const double length = kLengthFraction * std::min(c_.dims.height, c_.dims.width) *
                          std::pow(kLengthDecay, generation - 1);
    const auto steps = static_cast<int>(std::ceil(length / kStep));
    const double dh = std::cos(theta), dw = std::sin(theta);
    for (int i = 0; i <= steps; ++i) {
      const double ph = h + dh * kStep * i, pw = w + dw * kStep * i;
      if (ph < 0 || pw < 0 || ph > c_.dims.height - 1.0 || pw > c_.dims.width - 1.0) return;
      sphere(surface(ph, pw) + radius, ph, pw, radius);
    }
    const double spread = p_.branch_angle_spread * std::numbers::pi / 180.0;
    const double a = spread * rng_.uniform(0.5, 1.0);
    const double b = spread * rng_.uniform(0.5, 1.0);
    const double eh = h + dh * kStep * steps, ew = w + dw * kStep * steps;
    branch(eh, ew, theta + a, generation + 1);
    branch(eh, ew, theta - b, generation + 1);
  }

 private:
  void sphere(double cz, double ch, double cw, double r) {
    auto lo = [](double x) { return static_cast<std::size_t>(std::max(0.0, std::floor(x))); };
    auto hi = [](double x, std::uint32_t n) { return static_cast<std::size_t>(std::min<double>(n - 1, std::ceil(x))); };
    if (cz - r > c_.dims.depth - 1.0) return;
    for (std::size_t z = lo(cz - r); z <= hi(cz + r, c_.dims.depth); ++z)
      for (std::size_t h = lo(ch - r); h <= hi(ch + r, c_.dims.height); ++h)
        for (std::size_t w = lo(cw - r); w <= hi(cw + r, c_.dims.width); ++w) {
          const double a = z - cz, b = h - ch, c = w - cw;
          if (a * a + b * b + c * c <= r * r) v_.set(z, h, w);
        }
  }

  const PhenotypeParams& p_;
  const Canvas& c_;
  MaskVolume& v_;
  Rng& rng_;
};

void apply_flip_noise(MaskVolume& v, double rate, Rng& rng) {
  if (rate <= 0.0) return;
  const std::size_t n = v.dims().count();
  const double log_keep = std::log1p(-rate);
  auto skip = [&] { return static_cast<std::size_t>(std::floor(std::log(1.0 - rng.uniform()) / log_keep)); };
  for (std::size_t i = skip(); i < n; i += 1 + skip()) v.flip(i);
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

PhenotypeParams blend(const PhenotypeParams& a, const PhenotypeParams& b, double t) {
  PhenotypeParams p;
  p.cup_depth = lerp(a.cup_depth, b.cup_depth, t);
  p.cup_radius = lerp(a.cup_radius, b.cup_radius, t);
  p.trunk_nasal_offset = lerp(a.trunk_nasal_offset, b.trunk_nasal_offset, t);
  p.root_diameter = lerp(a.root_diameter, b.root_diameter, t);
  p.taper_ratio = lerp(a.taper_ratio, b.taper_ratio, t);
  p.branch_depth = static_cast<int>(std::lround(lerp(a.branch_depth, b.branch_depth, t)));
  p.branch_angle_spread = lerp(a.branch_angle_spread, b.branch_angle_spread, t);
  p.noise = lerp(a.noise, b.noise, t);
  return p;
}

}  // namespace

void PhenotypeParams::validate(Dims canvas) const {
  const Canvas c(canvas);
  const double lateral = std::min(canvas.height, canvas.width);
  if (!(cup_depth > 0)) reject("cup_depth", cup_depth, "must be positive");
  const double max_cup = canvas.depth - 1.0 - c.surface_z - static_cast<double>(c.trunk_length);
  if (cup_depth > max_cup) reject("cup_depth", cup_depth, "pushes the trunk below the canvas floor (max " + format_number(max_cup) + ")");
  if (!(cup_radius > 0)) reject("cup_radius", cup_radius, "must be positive");
  if (cup_radius >= lateral / 2.0) reject("cup_radius", cup_radius, "exceeds half the lateral canvas");
  if (!(root_diameter > 0)) reject("root_diameter", root_diameter, "must be positive");
  if (root_diameter > lateral / 4.0) reject("root_diameter", root_diameter, "exceeds a quarter of the lateral canvas");
  const double r = root_diameter / 2.0;
  const double tw = c.center_w + trunk_nasal_offset;
  if (tw - r < 0 || tw + r > canvas.width - 1.0) {
    reject("trunk_nasal_offset", trunk_nasal_offset, "places the trunk outside the canvas");
  }
  if (!(taper_ratio > 0 && taper_ratio <= 1)) reject("taper_ratio", taper_ratio, "must lie in (0, 1]");
  if (branch_depth < 0 || branch_depth > 8) reject("branch_depth", branch_depth, "must lie in 0..8");
  if (!(branch_angle_spread > 0 && branch_angle_spread < 90)) {
    reject("branch_angle_spread", branch_angle_spread, "must lie in (0, 90) degrees");
  }
  if (!(noise >= 0 && noise <= 0.05)) reject("noise", noise, "must lie in [0, 0.05]");
}

std::string PhenotypeParams::to_string() const {
  return "cup_depth=" + format_number(cup_depth) + ";cup_radius=" + format_number(cup_radius) +
         ";trunk_nasal_offset=" + format_number(trunk_nasal_offset) + ";root_diameter=" +
         format_number(root_diameter) + ";taper_ratio=" + format_number(taper_ratio) +
         ";branch_depth=" + std::to_string(branch_depth) + ";branch_angle_spread=" +
         format_number(branch_angle_spread) + ";noise=" + format_number(noise);
}

PhenotypeParams PhenotypeParams::parse(const std::string& text) {
  PhenotypeParams p;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("synthgen: bad parameter item '" + item + "'");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    double x = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw FormatError("synthgen: bad value in '" + item + "'");
    }
    if (key == "cup_depth") p.cup_depth = x;
    else if (key == "cup_radius") p.cup_radius = x;
    else if (key == "trunk_nasal_offset") p.trunk_nasal_offset = x;
    else if (key == "root_diameter") p.root_diameter = x;
    else if (key == "taper_ratio") p.taper_ratio = x;
    else if (key == "branch_depth") p.branch_depth = static_cast<int>(x);
    else if (key == "branch_angle_spread") p.branch_angle_spread = x;
    else if (key == "noise") p.noise = x;
    else throw FormatError("synthgen: unknown parameter '" + key + "'");
    pos = end + 1;
  }
  return p;
}

Regime control_regime() {
  Regime r;
  r.mean = {8.0, 14.0, 0.0, 7.0, 0.8, 4, 35.0, 1e-5};
  r.jitter = {3.0, 3.0, 3.0, 0.8, 0.04, 0, 5.0, 0.0};
  return r;
}

Regime glaucoma_regime() {
  Regime r;
  r.mean = {30.0, 24.0, 10.0, 4.5, 0.65, 4, 35.0, 1e-5};
  r.jitter = {3.0, 3.0, 3.0, 0.8, 0.04, 0, 5.0, 0.0};
  return r;
}

PhenotypeParams sample_params(const Regime& regime, Rng& rng) {
  auto draw = [&](double mean, double jitter) { return mean + jitter * rng.uniform(-1.0, 1.0); };
  PhenotypeParams p = regime.mean;
  p.cup_depth = draw(regime.mean.cup_depth, regime.jitter.cup_depth);
  p.cup_radius = draw(regime.mean.cup_radius, regime.jitter.cup_radius);
  p.trunk_nasal_offset = draw(regime.mean.trunk_nasal_offset, regime.jitter.trunk_nasal_offset);
  p.root_diameter = draw(regime.mean.root_diameter, regime.jitter.root_diameter);
  p.taper_ratio = draw(regime.mean.taper_ratio, regime.jitter.taper_ratio);
  p.branch_angle_spread = draw(regime.mean.branch_angle_spread, regime.jitter.branch_angle_spread);
  return p;
}

MaskVolume render_tree(const PhenotypeParams& params, std::uint64_t seed, Dims canvas) {
  params.validate(canvas);
  const Canvas c(canvas);
  MaskVolume v(canvas);
  Rng rng(derive_seed(seed, 1));
  TreeRasterizer tree(params, c, v, rng);
  const double th = c.center_h, tw = c.center_w + params.trunk_nasal_offset;
  tree.trunk(th, tw);
  if (params.branch_depth > 0) {
    const double jitter = params.branch_angle_spread * std::numbers::pi / 720.0;
    tree.branch(th, tw, rng.uniform(-jitter, jitter), 1);
    tree.branch(th, tw, std::numbers::pi + rng.uniform(-jitter, jitter), 1);
  }
  Rng noise(derive_seed(seed, 2));
  apply_flip_noise(v, params.noise, noise);
  return v;
}

SyntheticSubject generate_subject(Label label, const Regime& regime, std::uint64_t seed, Dims canvas) {
  Rng rng(derive_seed(seed, 0));
  SyntheticSubject s;
  s.label = label;
  s.params = sample_params(regime, rng);
  s.seed = seed;
  s.volume = render_tree(s.params, seed, canvas);
  return s;
}

Regime regime_at(Label label, double separation, const DatasetConfig& config) {
  if (!(separation >= 0.0 && separation <= 1.0)) {
    throw std::invalid_argument("synthgen: separation " + format_number(separation) + " outside [0, 1]");
  }
  Regime r = label == Label::Control ? config.control : config.glaucoma;
  const double t = label == Label::Control ? 0.5 - 0.5 * separation : 0.5 + 0.5 * separation;
  r.mean = blend(config.control.mean, config.glaucoma.mean, t);
  return r;
}

std::vector<SubjectPlan> plan_dataset(std::size_t n_per_class, double separation, std::uint64_t seed,
                                      const DatasetConfig& config) {
  if (n_per_class == 0) throw std::invalid_argument("synthgen: n_per_class must be at least 1");
  const Regime regimes[2] = {regime_at(Label::Control, separation, config),
                             regime_at(Label::Glaucoma, separation, config)};
  std::vector<SubjectPlan> plans;
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    SubjectPlan p;
    p.index = i;
    p.label = i < n_per_class ? Label::Control : Label::Glaucoma;
    p.seed = derive_seed(seed, i);
    Rng rng(derive_seed(p.seed, 0));
    p.params = sample_params(regimes[static_cast<int>(p.label)], rng);
    p.params.validate(config.canvas);
    plans.push_back(p);
  }
  return plans;
}

SyntheticSubject render(const SubjectPlan& plan, Dims canvas) {
  return {render_tree(plan.params, plan.seed, canvas), plan.label, plan.params, plan.seed};
}

std::vector<SyntheticSubject> generate_dataset(std::size_t n_per_class, double separation, std::uint64_t seed,
                                               const DatasetConfig& config) {
  std::vector<SyntheticSubject> out;
  for (const auto& p : plan_dataset(n_per_class, separation, seed, config)) out.push_back(render(p, config.canvas));
  return out;
}

std::string subject_filename(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "subject_" + digits + ".vmk";
}

CsvTable manifest_table(const std::vector<ManifestEntry>& entries) {
  CsvTable t;
  t.header = {"filename", "label", "seed", "params"};
  for (const auto& e : entries) t.rows.push_back({e.filename, std::to_string(e.label), std::to_string(e.seed), e.params});
  return t;
}

std::vector<ManifestEntry> read_manifest(const std::string& dataset_dir) {
  const std::string path = (std::filesystem::path(dataset_dir) / "manifest.csv").string();
  const CsvTable t = CsvTable::parse(read_file(path), path);
  const std::size_t cf = t.column("filename"), cl = t.column("label"), cs = t.column("seed"), cp = t.column("params");
  std::vector<ManifestEntry> out;
  for (const auto& row : t.rows) {
    ManifestEntry e;
    e.filename = row[cf];
    if (row[cl] != "0" && row[cl] != "1") throw FormatError(path + ": label must be 0 or 1, got '" + row[cl] + "'");
    e.label = row[cl] == "1" ? 1 : 0;
    auto [ptr, ec] = std::from_chars(row[cs].data(), row[cs].data() + row[cs].size(), e.seed);
    if (ec != std::errc() || ptr != row[cs].data() + row[cs].size()) {
      throw FormatError(path + ": bad seed '" + row[cs] + "'");
    }
    e.params = row[cp];
    out.push_back(e);
  }
  return out;
}

void write_dataset(const std::string& dir, std::size_t n_per_class, double separation, std::uint64_t seed,
                   const DatasetConfig& config) {
  std::vector<ManifestEntry> entries;
  for (const auto& plan : plan_dataset(n_per_class, separation, seed, config)) {
    const auto subject = render(plan, config.canvas);
    const std::string name = subject_filename(plan.index);
    save_volume((std::filesystem::path(dir) / name).string(), subject.volume);
    entries.push_back({name, static_cast<int>(plan.label), plan.seed, plan.params.to_string()});
  }
  write_file_atomic((std::filesystem::path(dir) / "manifest.csv").string(), manifest_table(entries).to_string());
}

}  // namespace vesselnet::synth
