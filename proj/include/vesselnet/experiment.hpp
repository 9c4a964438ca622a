#pragma once

// Experiment directories.
//
//   config.kv              resolved configuration (every key, defaults filled in)
//   folds.csv              sample,group,label,fold
//   fold_<f>/checkpoint.vnck   best weights of fold f (train3d, train2d)
//   fold_<f>/history.csv       epoch,train_loss,val_loss
//   report.csv             metrics rows per (model, fold, split) plus pooled test rows
//   scores.csv             model,fold,sample,label,score for every test prediction
//   ablation.csv           view,folds,auc_mean,... (ablate only)
//   FAILED                 one-line reason, present only when the run failed
//
// No file contains timestamps, so reruns with the same config reproduce
// every CSV byte for byte.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vesselnet/dataset.hpp"
#include "vesselnet/models.hpp"
#include "vesselnet/trainer.hpp"

namespace vesselnet::experiment {

inline constexpr const char* kConfigFormat = "vesselnet-experiment 1";

enum class Command { Train3D, Train2D, Ablate };

const char* command_name(Command c);

struct SynthSource {
  std::size_t n_per_class = 100;
  double separation = 1.0;
  std::uint64_t seed = 0;
  Dims canvas = synth::kDefaultCanvas;
};

struct ExperimentConfig {
  Command command = Command::Train2D;
  std::uint64_t seed = 0;
  std::string data_dir;              // dataset directory; empty selects `synth`
  SynthSource synth;
  data::PrepConfig prep;
  models::ModelSpec model;
  train::OptimizerConfig optim;
  std::size_t folds = 5;
  std::uint64_t cv_seed = 0;

  /// Reads and validates every key. Unknown keys, keys belonging to the
  /// other model kind, wrong model kinds and mismatched input sizes are
  /// ConfigErrors; a missing data.dir is an IoError.
  static ExperimentConfig from_kv(Command command, const KeyValueFile& kv);
  KeyValueFile to_kv() const;
  data::InputKind input_kind() const;
};

std::set<std::string> allowed_keys();

data::Dataset load_data(const ExperimentConfig& config);

struct RunResult {
  std::vector<train::EvalReport> reports;  // rows of report.csv
  std::vector<train::AblationRow> ablation;
};

using LogLine = std::function<void(const std::string&)>;

/// Runs the experiment into `out_dir`. Any stale FAILED marker is removed
/// first; on error a FAILED marker holding the message is written and the
/// exception is rethrown.
RunResult run(const ExperimentConfig& config, const std::string& out_dir, const LogLine& log = {});

// Pooled test row over every fold of one model tag.
train::EvalReport pooled_test(const std::vector<train::FoldResult>& folds, const std::string& model);

// Relative paths are placed under $VESSELNET_OUTPUT_ROOT when it is set.
std::string resolve_output_path(const std::string& path);

/// Rebuilds the model recorded in a checkpoint's meta keys and loads its
/// weights; `prep` receives the recorded data.* keys.
std::unique_ptr<models::Classifier> load_model(const nn::Checkpoint& checkpoint, data::PrepConfig& prep);

}  // namespace vesselnet::experiment
