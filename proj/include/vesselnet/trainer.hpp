#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vesselnet/dataset.hpp"
#include "vesselnet/metrics.hpp"
#include "vesselnet/models.hpp"
#include "vesselnet/nn/checkpoint.hpp"

namespace vesselnet::train {

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::size_t epochs = 1000;

  void validate() const;
  void write(KeyValueFile& kv) const;  // optim.*
  static OptimizerConfig read(const KeyValueFile& kv);
  static OptimizerConfig read(const KeyValueFile& kv, const OptimizerConfig& fallback);
};

// v <- momentum v + g; w <- w - lr v (classic momentum).
void sgd_step(std::span<float> weights, std::span<const float> grads, std::span<float> velocity,
              double learning_rate, double momentum);

/// Momentum SGD over the trainable tensors of a registry. A tensor that
/// received no gradient is treated as having a zero gradient.
class SgdMomentum {
 public:
  explicit SgdMomentum(const OptimizerConfig& config) : config_(config) {}
  void step(nn::ParameterSet<float>& params);

 private:
  OptimizerConfig config_;
  std::vector<std::vector<float>> velocity_;
};

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_loss;
  double val_loss;
};

struct TrainResult {
  nn::Checkpoint best;     // weights after best_epoch (0 = initial weights)
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

using EpochLogger = std::function<void(const EpochRecord&)>;

// Index of the earliest minimum of val_loss (1-based epoch); 0 when empty.
std::size_t best_epoch(const std::vector<EpochRecord>& history);

// Mean cross-entropy over the dataset in eval mode.
double dataset_loss(models::Classifier& model, const data::Dataset& ds, std::size_t batch_size);

/// Trains in place with seeded shuffling and returns the best checkpoint by
/// validation loss. The model is left at the best weights. Throws
/// std::invalid_argument when a split is empty or the splits share a sample
/// id.
TrainResult train(models::Classifier& model, const data::Dataset& train_set, const data::Dataset& val_set,
                  const OptimizerConfig& config, std::uint64_t seed, const EpochLogger& log = {});

/// Full-batch SGD on a fixed batch until the train-mode cross-entropy drops
/// below `target` or `max_steps` is reached. Returns the loss before each
/// step plus the final loss.
std::vector<double> fit_batch(models::Classifier& model, const nn::Tensor<float>& batch,
                              std::span<const int> labels, const OptimizerConfig& config, std::size_t max_steps,
                              double target, std::uint64_t seed);

struct FoldPlan {
  std::size_t k = 5;
  std::vector<std::size_t> assignment;  // sample -> fold

  std::vector<std::size_t> members(std::size_t fold) const;
};

/// Stratified, group-aware assignment. Groups (one per sample when `groups`
/// is empty) are shuffled within each class and dealt to the fold holding
/// the fewest groups of that class, ties going to the smaller fold and then
/// the lower index. Throws when a class has fewer than k groups or a group
/// mixes labels.
FoldPlan kfold_split(std::span<const int> labels, std::span<const std::string> groups, std::size_t k,
                     std::uint64_t seed);

CsvTable fold_table(const FoldPlan& plan, const data::Dataset& ds);

struct EvalReport {
  std::string model;  // tag, e.g. "cnn2d" or a view name
  std::string split;
  std::optional<std::size_t> fold;
  ConfusionCounts counts;
  ClassificationMetrics metrics;
  double dice = 0.0;
  double jaccard = 0.0;
  std::optional<RocCurve> roc;  // absent for single-class data
  std::vector<double> scores;   // positive-class probability per sample
  std::vector<int> labels;
  std::vector<std::string> warnings;

  std::optional<double> auc() const { return roc ? std::optional<double>(roc->auc) : std::nullopt; }
};

// Eval-mode inference; threshold 0.5 on the positive-class probability.
EvalReport evaluate(models::Classifier& model, const data::Dataset& ds, std::size_t batch_size = 8);
EvalReport report_from_scores(std::span<const double> scores, std::span<const int> labels);

// Header: model,fold,split,n,tp,fp,fn,tn,accuracy,sensitivity,specificity,dice,jaccard,auc
CsvTable metrics_table(const std::vector<EvalReport>& reports);

struct FoldResult {
  std::size_t fold;
  TrainResult training;
  EvalReport val;
  EvalReport test;
};

/// Fold f is the test set, fold (f + 1) mod k validates and the rest train.
/// Every fold trains a fresh model from build_model(spec, derive_seed(seed, f)).
/// `on_fold` (optional) sees each result as it completes.
std::vector<FoldResult> cross_validate(const models::ModelSpec& spec, const data::Dataset& ds, const FoldPlan& plan,
                                       const OptimizerConfig& config, std::uint64_t seed,
                                       const std::function<void(const FoldResult&, models::Classifier&)>& on_fold = {},
                                       const EpochLogger& log = {});

struct AblationRow {
  std::string view;  // frontal, transverse, sagittal or all-views
  std::vector<FoldResult> folds;

  std::vector<double> test_aucs() const;
};

/// Single-view ablation: three rows trained on replicated views plus the
/// all-views row, all on the same fold plan and seed.
std::vector<AblationRow> ablate_single_view(const models::Model2DSpec& spec, const data::Dataset& ds,
                                            const FoldPlan& plan, const OptimizerConfig& config, std::uint64_t seed,
                                            const std::vector<std::string>& views = {"frontal", "transverse",
                                                                                     "sagittal", "all-views"},
                                            const EpochLogger& log = {});

// Header: view,folds,auc_mean,auc_std,accuracy_mean,sensitivity_mean,specificity_mean
CsvTable ablation_table(const std::vector<AblationRow>& rows);

}  // namespace vesselnet::train
