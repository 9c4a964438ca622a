#include "vesselnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace vesselnet::train {

using nn::Mode;
using nn::Tensor;

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optim.learning_rate must be positive, got " + format_number(learning_rate));
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("optim.momentum must lie in [0, 1), got " + format_number(momentum));
  }
  if (batch_size == 0) throw ConfigError("optim.batch_size must be at least 1");
}

void OptimizerConfig::write(KeyValueFile& kv) const {
  kv.set("optim.learning_rate", format_number(learning_rate));
  kv.set("optim.momentum", format_number(momentum));
  kv.set("optim.batch_size", std::to_string(batch_size));
  kv.set("optim.epochs", std::to_string(epochs));
}

OptimizerConfig OptimizerConfig::read(const KeyValueFile& kv) { return read(kv, OptimizerConfig{}); }

OptimizerConfig OptimizerConfig::read(const KeyValueFile& kv, const OptimizerConfig& fallback) {
  OptimizerConfig c;
  c.learning_rate = kv.get_double("optim.learning_rate", fallback.learning_rate);
  c.momentum = kv.get_double("optim.momentum", fallback.momentum);
  const long long batch = kv.get_int("optim.batch_size", static_cast<long long>(fallback.batch_size));
  const long long epochs = kv.get_int("optim.epochs", static_cast<long long>(fallback.epochs));
  if (batch < 1) throw ConfigError("optim.batch_size must be at least 1");
  if (epochs < 0) throw ConfigError("optim.epochs must not be negative");
  c.batch_size = static_cast<std::size_t>(batch);
  c.epochs = static_cast<std::size_t>(epochs);
  c.validate();
  return c;
}

void sgd_step(std::span<float> weights, std::span<const float> grads, std::span<float> velocity,
              double learning_rate, double momentum) {
  if (weights.size() != grads.size() || weights.size() != velocity.size()) {
    throw nn::ShapeError("sgd_step: weights, gradients and velocity differ in size");
  }
  const auto lr = static_cast<float>(learning_rate);
  const auto mu = static_cast<float>(momentum);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    velocity[i] = mu * velocity[i] + grads[i];
    weights[i] -= lr * velocity[i];
  }
}

void SgdMomentum::step(nn::ParameterSet<float>& params) {
  const auto& entries = params.entries();
  if (velocity_.empty()) {
    for (const auto& e : entries) velocity_.emplace_back(e.trainable ? e.tensor.size() : 0, 0.0f);
  }
  if (velocity_.size() != entries.size()) throw std::logic_error("SgdMomentum: parameter registry changed");
  std::vector<float> zeros;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].trainable) continue;
    Tensor<float> t = entries[i].tensor;
    std::span<const float> g;
    if (t.has_grad()) {
      g = t.grad();
    } else {
      zeros.assign(t.size(), 0.0f);
      g = zeros;
    }
    sgd_step(t.data(), g, velocity_[i], config_.learning_rate, config_.momentum);
  }
}

std::size_t best_epoch(const std::vector<EpochRecord>& history) {
  std::size_t best = 0;
  double loss = std::numeric_limits<double>::infinity();
  for (const auto& r : history) {
    if (r.val_loss < loss) {
      loss = r.val_loss;
      best = r.epoch;
    }
  }
  return best;
}

double dataset_loss(models::Classifier& model, const data::Dataset& ds, std::size_t batch_size) {
  nn::NoGradGuard guard;
  Rng unused(0);
  const auto labels = ds.labels();
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
    auto logits = model.forward(data::make_batch(ds, idx), Mode::Eval, unused);
    auto ce = nn::softmax_cross_entropy(logits, std::span<const int>(labels).subspan(start, idx.size()));
    total += static_cast<double>(ce.loss.item()) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(ds.size());
}

namespace {

std::vector<std::pair<std::string, std::string>> spec_meta(const models::Classifier& model) {
  KeyValueFile kv;
  models::write_spec(model.spec(), kv);
  std::vector<std::pair<std::string, std::string>> meta;
  for (const auto& k : kv.keys()) meta.emplace_back(k, kv.get(k));
  return meta;
}

}  // namespace

TrainResult train(models::Classifier& model, const data::Dataset& train_set, const data::Dataset& val_set,
                  const OptimizerConfig& config, std::uint64_t seed, const EpochLogger& log) {
  config.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: training split is empty");
  if (val_set.size() == 0) throw std::invalid_argument("train: validation split is empty");
  std::set<std::string> ids;
  for (const auto& s : train_set.samples) ids.insert(s.id);
  for (const auto& s : val_set.samples) {
    if (ids.count(s.id)) throw std::invalid_argument("train: sample '" + s.id + "' is in both splits");
  }

  auto& params = model.parameters();
  SgdMomentum optimizer(config);
  Rng shuffle(derive_seed(seed, 1));
  Rng noise(derive_seed(seed, 2));
  const auto labels = train_set.labels();

  TrainResult result;
  result.best = nn::snapshot(params);
  result.best_val_loss = std::numeric_limits<double>::infinity();
  if (config.epochs == 0) result.best_val_loss = dataset_loss(model, val_set, config.batch_size);

  std::vector<std::size_t> order(train_set.size());
  std::vector<int> batch_labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> idx(order.data() + start, count);
      batch_labels.clear();
      for (auto i : idx) batch_labels.push_back(labels[i]);
      params.zero_grad();
      auto logits = model.forward(data::make_batch(train_set, idx), Mode::Train, noise);
      auto ce = nn::softmax_cross_entropy(logits, batch_labels);
      nn::backward(ce.loss);
      optimizer.step(params);
      total += static_cast<double>(ce.loss.item()) * static_cast<double>(count);
    }
    EpochRecord rec{epoch, total / static_cast<double>(order.size()),
                    dataset_loss(model, val_set, config.batch_size)};
    result.history.push_back(rec);
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.best = nn::snapshot(params);
    }
    if (log) log(rec);
  }
  params.zero_grad();
  nn::restore(result.best, params);
  result.best.meta = spec_meta(model);
  result.best.meta.emplace_back("train.best_epoch", std::to_string(result.best_epoch));
  result.best.meta.emplace_back("train.best_val_loss", format_number(result.best_val_loss));
  return result;
}

std::vector<double> fit_batch(models::Classifier& model, const Tensor<float>& batch, std::span<const int> labels,
                              const OptimizerConfig& config, std::size_t max_steps, double target,
                              std::uint64_t seed) {
  auto& params = model.parameters();
  SgdMomentum optimizer(config);
  Rng noise(derive_seed(seed, 2));
  std::vector<double> losses;
  for (std::size_t step = 0; step <= max_steps; ++step) {
    params.zero_grad();
    auto ce = nn::softmax_cross_entropy(model.forward(batch, Mode::Train, noise), labels);
    losses.push_back(ce.loss.item());
    if (losses.back() < target || step == max_steps) break;
    nn::backward(ce.loss);
    optimizer.step(params);
  }
  params.zero_grad();
  return losses;
}

std::vector<std::size_t> FoldPlan::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan kfold_split(std::span<const int> labels, std::span<const std::string> groups, std::size_t k,
                     std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be at least 2");
  if (!groups.empty() && groups.size() != labels.size()) {
    throw std::invalid_argument("kfold_split: groups and labels differ in length");
  }
  std::map<std::string, std::size_t> group_index;
  std::vector<std::size_t> sample_group(labels.size());
  std::vector<int> group_label;
  std::vector<std::size_t> group_size;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string key = groups.empty() ? std::to_string(i) : groups[i];
    auto [it, fresh] = group_index.emplace(key, group_label.size());
    if (fresh) {
      group_label.push_back(labels[i]);
      group_size.push_back(0);
    } else if (group_label[it->second] != labels[i]) {
      throw std::invalid_argument("kfold_split: group '" + key + "' mixes labels");
    }
    sample_group[i] = it->second;
    ++group_size[it->second];
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t g = 0; g < group_label.size(); ++g) by_class[group_label[g]].push_back(g);
  Rng rng(derive_seed(seed, 0x6b666f6c64ULL));
  std::vector<std::size_t> group_fold(group_label.size());
  std::vector<std::size_t> total(k, 0);
  for (auto& [label, members] : by_class) {
    if (members.size() < k) {
      throw std::invalid_argument("kfold_split: class " + std::to_string(label) + " has " +
                                  std::to_string(members.size()) + " groups, fewer than k = " + std::to_string(k));
    }
    rng.shuffle(members);
    std::vector<std::size_t> count(k, 0);
    for (auto g : members) {
      std::size_t best = 0;
      for (std::size_t f = 1; f < k; ++f) {
        if (std::tie(count[f], total[f]) < std::tie(count[best], total[best])) best = f;
      }
      group_fold[g] = best;
      ++count[best];
      total[best] += group_size[g];
    }
  }
  FoldPlan plan;
  plan.k = k;
  for (auto g : sample_group) plan.assignment.push_back(group_fold[g]);
  return plan;
}

CsvTable fold_table(const FoldPlan& plan, const data::Dataset& ds) {
  CsvTable t;
  t.header = {"sample", "group", "label", "fold"};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples[i];
    t.rows.push_back({s.id, s.group, std::to_string(s.label), std::to_string(plan.assignment.at(i))});
  }
  return t;
}

EvalReport report_from_scores(std::span<const double> scores, std::span<const int> labels) {
  EvalReport r;
  r.scores.assign(scores.begin(), scores.end());
  r.labels.assign(labels.begin(), labels.end());
  std::vector<int> pred;
  for (double s : scores) pred.push_back(s >= 0.5 ? 1 : 0);
  r.counts = confusion_counts(pred, labels);
  r.metrics = classification_metrics(r.counts);
  r.dice = dice(r.counts);
  r.jaccard = jaccard(r.counts);
  if (r.counts.tp + r.counts.fn > 0 && r.counts.tn + r.counts.fp > 0) {
    r.roc = roc_auc(scores, labels);
  } else {
    r.warnings.push_back("single-class data: AUC omitted");
  }
  return r;
}

EvalReport evaluate(models::Classifier& model, const data::Dataset& ds, std::size_t batch_size) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: dataset is empty");
  nn::NoGradGuard guard;
  Rng unused(0);
  const auto labels = ds.labels();
  std::vector<double> scores;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
    auto logits = model.forward(data::make_batch(ds, idx), Mode::Eval, unused);
    auto ce = nn::softmax_cross_entropy(logits, std::span<const int>(labels).subspan(start, idx.size()));
    const std::size_t classes = logits.dim(1);
    for (std::size_t n = 0; n < idx.size(); ++n) scores.push_back(ce.probs[n * classes + 1]);
  }
  auto r = report_from_scores(scores, labels);
  r.model = models::model_kind(model.spec());
  return r;
}

CsvTable metrics_table(const std::vector<EvalReport>& reports) {
  CsvTable t;
  t.header = {"model", "fold",        "split",       "n",    "tp",      "fp", "fn",
              "tn",    "accuracy",    "sensitivity", "specificity", "dice", "jaccard", "auc"};
  for (const auto& r : reports) {
    const auto& c = r.counts;
    t.rows.push_back({r.model, r.fold ? std::to_string(*r.fold) : "all", r.split, std::to_string(c.total()),
                      std::to_string(c.tp), std::to_string(c.fp), std::to_string(c.fn), std::to_string(c.tn),
                      format_metric(r.metrics.accuracy), format_metric(r.metrics.sensitivity),
                      format_metric(r.metrics.specificity), format_number(r.dice), format_number(r.jaccard),
                      format_metric(r.auc())});
  }
  return t;
}

std::vector<FoldResult> cross_validate(const models::ModelSpec& spec, const data::Dataset& ds, const FoldPlan& plan,
                                       const OptimizerConfig& config, std::uint64_t seed,
                                       const std::function<void(const FoldResult&, models::Classifier&)>& on_fold,
                                       const EpochLogger& log) {
  if (plan.assignment.size() != ds.size()) throw std::invalid_argument("cross_validate: fold plan does not match the dataset");
  std::vector<FoldResult> results;
  for (std::size_t f = 0; f < plan.k; ++f) {
    const std::size_t v = (f + 1) % plan.k;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (plan.assignment[i] != f && plan.assignment[i] != v) train_idx.push_back(i);
    }
    const auto test_set = ds.subset(plan.members(f));
    const auto val_set = ds.subset(plan.members(v));
    auto model = models::build_model(spec, derive_seed(seed, f));
    FoldResult r;
    r.fold = f;
    r.training = train(*model, ds.subset(train_idx), val_set, config, derive_seed(seed, 1000 + f), log);
    r.val = evaluate(*model, val_set, config.batch_size);
    r.test = evaluate(*model, test_set, config.batch_size);
    r.val.fold = r.test.fold = f;
    r.val.split = "val";
    r.test.split = "test";
    if (on_fold) on_fold(r, *model);
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<double> AblationRow::test_aucs() const {
  std::vector<double> out;
  for (const auto& f : folds) {
    if (f.test.auc()) out.push_back(*f.test.auc());
  }
  return out;
}

std::vector<AblationRow> ablate_single_view(const models::Model2DSpec& spec, const data::Dataset& ds,
                                            const FoldPlan& plan, const OptimizerConfig& config, std::uint64_t seed,
                                            const std::vector<std::string>& views, const EpochLogger& log) {
  for (const auto& v : views) {
    if (v != "all-views") parse_view(v);
  }
  std::vector<AblationRow> rows;
  for (const auto& v : views) {
    const auto input = v == "all-views" ? ds : data::replicate_view(ds, parse_view(v));
    AblationRow row{v, cross_validate(spec, input, plan, config, seed, {}, log)};
    for (auto& f : row.folds) f.val.model = f.test.model = v;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string mean_of_defined(const std::vector<std::optional<double>>& xs) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& x : xs) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  return n ? format_number(sum / static_cast<double>(n)) : "NA";
}

}  // namespace

CsvTable ablation_table(const std::vector<AblationRow>& rows) {
  CsvTable t;
  t.header = {"view", "folds", "auc_mean", "auc_std", "accuracy_mean", "sensitivity_mean", "specificity_mean"};
  for (const auto& row : rows) {
    const auto aucs = row.test_aucs();
    std::string mean = "NA", sd = "NA";
    if (!aucs.empty()) {
      const double m = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
      double ss = 0;
      for (double a : aucs) ss += (a - m) * (a - m);
      mean = format_number(m);
      sd = aucs.size() > 1 ? format_number(std::sqrt(ss / static_cast<double>(aucs.size() - 1))) : "NA";
    }
    std::vector<std::optional<double>> acc, sens, spec;
    for (const auto& f : row.folds) {
      acc.push_back(f.test.metrics.accuracy);
      sens.push_back(f.test.metrics.sensitivity);
      spec.push_back(f.test.metrics.specificity);
    }
    t.rows.push_back({row.view, std::to_string(row.folds.size()), mean, sd, mean_of_defined(acc),
                      mean_of_defined(sens), mean_of_defined(spec)});
  }
  return t;
}

}  // namespace vesselnet::train
