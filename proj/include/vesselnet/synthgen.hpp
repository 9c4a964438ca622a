#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vesselnet/io.hpp"
#include "vesselnet/rng.hpp"
#include "vesselnet/volume.hpp"

namespace vesselnet::synth {

enum class Label { Control = 0, Glaucoma = 1 };

/// Geometry of one synthetic vessel tree, in voxels of the canvas.
///
/// The retina surface sits at depth 0.3 D. A paraboloid cup of the given
/// depth and radius is centred on the disc (H/2, W/2). The trunk is a
/// depth-aligned cylinder of root_diameter whose top touches the surface at
/// (H/2, W/2 + trunk_nasal_offset) and which runs 0.3 D deep. From the trunk
/// top two primary vessels leave superiorly and inferiorly and split
/// binarily branch_depth - 1 more times, each child turning by up to
/// branch_angle_spread degrees. Generation g (1-based) has diameter
/// root_diameter * taper_ratio^g and length 0.25 min(H, W) * 0.7^(g-1);
/// vessels follow the cup surface just beneath it and are clipped at the
/// lateral canvas edges.
struct PhenotypeParams {
  double cup_depth = 8.0;
  double cup_radius = 14.0;
  double trunk_nasal_offset = 0.0;
  double root_diameter = 7.0;
  double taper_ratio = 0.8;
  int branch_depth = 4;
  double branch_angle_spread = 35.0;
  double noise = 1e-5;

  // Throws std::invalid_argument naming the first offending parameter,
  // including geometry that does not fit the canvas.
  void validate(Dims canvas) const;
  // "name=value;..." (no commas, for the manifest).
  std::string to_string() const;
  static PhenotypeParams parse(const std::string& text);

  bool operator==(const PhenotypeParams&) const = default;
};

/// Class-conditional distribution: each field is drawn uniformly from
/// mean +- jitter (branch_depth and noise are not jittered).
struct Regime {
  PhenotypeParams mean;
  PhenotypeParams jitter;
};

Regime control_regime();
Regime glaucoma_regime();

inline constexpr Dims kDefaultCanvas{256, 128, 256};

struct SyntheticSubject {
  MaskVolume volume;
  Label label = Label::Control;
  PhenotypeParams params;
  std::uint64_t seed = 0;
};

PhenotypeParams sample_params(const Regime& regime, Rng& rng);

// Deterministic in (params, seed).
MaskVolume render_tree(const PhenotypeParams& params, std::uint64_t seed, Dims canvas = kDefaultCanvas);

SyntheticSubject generate_subject(Label label, const Regime& regime, std::uint64_t seed,
                                  Dims canvas = kDefaultCanvas);

struct DatasetConfig {
  Dims canvas = kDefaultCanvas;
  Regime control = control_regime();
  Regime glaucoma = glaucoma_regime();
};

// Class means at a given separation: both equal the midpoint of the two
// regimes at 0 and the regimes themselves at 1.
Regime regime_at(Label label, double separation, const DatasetConfig& config = {});

/// A subject before rendering. Subject i (controls first, then glaucoma)
/// uses seed derive_seed(master, i).
struct SubjectPlan {
  std::size_t index = 0;
  Label label = Label::Control;
  PhenotypeParams params;
  std::uint64_t seed = 0;
};

std::vector<SubjectPlan> plan_dataset(std::size_t n_per_class, double separation, std::uint64_t seed,
                                      const DatasetConfig& config = {});
SyntheticSubject render(const SubjectPlan& plan, Dims canvas = kDefaultCanvas);

// Renders every planned subject; memory grows with the canvas size.
std::vector<SyntheticSubject> generate_dataset(std::size_t n_per_class, double separation, std::uint64_t seed,
                                               const DatasetConfig& config = {});

/// Dataset directory: subject_NNNN.vmk files plus manifest.csv with columns
/// filename,label,seed,params (label 1 = glaucoma).
struct ManifestEntry {
  std::string filename;
  int label = 0;
  std::uint64_t seed = 0;
  std::string params;
};

std::string subject_filename(std::size_t index);
CsvTable manifest_table(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& dataset_dir);

// Renders and writes subjects one at a time.
void write_dataset(const std::string& dir, std::size_t n_per_class, double separation, std::uint64_t seed,
                   const DatasetConfig& config = {});

}  // namespace vesselnet::synth
