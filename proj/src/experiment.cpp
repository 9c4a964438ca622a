#include "vesselnet/experiment.hpp"

#include <cstdlib>
#include <filesystem>

namespace vesselnet::experiment {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kKeys3D = {"model.stem", "model.stage.", "model.head", "model.input", "model.se_reduction",
                                       "model.survival"};
const std::set<std::string> kKeys2D = {"model.m",       "model.n",       "model.p",   "model.feb_shared",
                                       "model.filters", "model.dropout", "model.rows", "model.cols"};

bool matches(const std::set<std::string>& keys, const std::string& key) {
  for (const auto& k : keys) {
    if (k == key || (k.back() == '.' && key.rfind(k, 0) == 0)) return true;
  }
  return false;
}

std::uint64_t get_seed(const KeyValueFile& kv, const std::string& key, std::uint64_t fallback) {
  const long long v = kv.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("key '" + key + "' must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

std::string csv_table_text(const std::vector<std::vector<std::string>>& rows, std::vector<std::string> header) {
  CsvTable t;
  t.header = std::move(header);
  t.rows = rows;
  return t.to_string();
}

}  // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::Train3D: return "train3d";
    case Command::Train2D: return "train2d";
    case Command::Ablate: return "ablate";
  }
  return "?";
}

std::set<std::string> allowed_keys() {
  auto keys = models::spec_keys();
  for (const char* k : {"format", "command", "seed", "data.dir", "data.downsample", "data.rows", "data.cols",
                        "synth.n_per_class", "synth.separation", "synth.seed", "synth.canvas", "optim.learning_rate",
                        "optim.momentum", "optim.batch_size", "optim.epochs", "cv.folds", "cv.seed"}) {
    keys.insert(k);
  }
  return keys;
}

ExperimentConfig ExperimentConfig::from_kv(Command command, const KeyValueFile& kv) {
  kv.reject_unknown(allowed_keys());
  if (kv.has("format") && kv.get("format") != kConfigFormat) {
    throw ConfigError("config format '" + kv.get("format") + "' is not supported (expected '" + kConfigFormat + "')");
  }
  if (kv.has("command") && kv.get("command") != command_name(command)) {
    throw ConfigError("config was written for '" + kv.get("command") + "', not '" + command_name(command) + "'");
  }

  ExperimentConfig c;
  c.command = command;
  c.seed = get_seed(kv, "seed", 0);
  c.data_dir = kv.get_or("data.dir", "");
  c.prep = data::PrepConfig::read(kv);

  c.synth.seed = get_seed(kv, "synth.seed", c.seed);
  const long long n = kv.get_int("synth.n_per_class", static_cast<long long>(c.synth.n_per_class));
  if (n < 1) throw ConfigError("key 'synth.n_per_class' must be at least 1");
  c.synth.n_per_class = static_cast<std::size_t>(n);
  c.synth.separation = kv.get_double("synth.separation", c.synth.separation);
  if (!(c.synth.separation >= 0.0 && c.synth.separation <= 1.0)) {
    throw ConfigError("key 'synth.separation' must lie in [0, 1]");
  }
  if (kv.has("synth.canvas")) {
    const auto d = Dims::parse(kv.get("synth.canvas"));
    if (!d) throw ConfigError("key 'synth.canvas' expects DxHxW, got '" + kv.get("synth.canvas") + "'");
    c.synth.canvas = *d;
  }
  if (c.data_dir.empty()) {
    // Planning is cheap; it surfaces phenotype/canvas conflicts before any rendering.
    for (const auto& plan : synth::plan_dataset(c.synth.n_per_class, c.synth.separation, c.synth.seed)) {
      try {
        plan.params.validate(c.synth.canvas);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("synth.canvas " + c.synth.canvas.to_string() + " cannot hold subject " +
                          std::to_string(plan.index) + ": " + e.what());
      }
    }
  } else {
    for (const auto& key : kv.keys()) {
      if (key.rfind("synth.", 0) == 0) throw ConfigError("key '" + key + "' conflicts with data.dir");
    }
  }

  // Model kind follows the command; input sizes default to the data prep.
  const std::string kind = command == Command::Train3D ? "efficientnet3d" : "cnn2d";
  if (kv.has("model.kind") && kv.get("model.kind") != kind) {
    throw ConfigError(std::string(command_name(command)) + " needs model.kind = " + kind + ", got '" +
                      kv.get("model.kind") + "'");
  }
  const auto& foreign = command == Command::Train3D ? kKeys2D : kKeys3D;
  for (const auto& key : kv.keys()) {
    if (matches(foreign, key)) throw ConfigError("key '" + key + "' does not apply to model.kind = " + kind);
  }
  KeyValueFile model_kv;
  for (const auto& key : kv.keys()) {
    if (key.rfind("model.", 0) == 0) model_kv.set(key, kv.get(key));
  }
  model_kv.set("model.kind", kind);
  if (command == Command::Train3D) {
    if (!model_kv.has("model.input")) model_kv.set("model.input", c.prep.downsample.to_string());
  } else {
    if (!model_kv.has("model.rows")) model_kv.set("model.rows", std::to_string(c.prep.rows));
    if (!model_kv.has("model.cols")) model_kv.set("model.cols", std::to_string(c.prep.cols));
  }
  c.model = models::read_spec(model_kv);
  if (const auto* s = std::get_if<models::Model3DSpec>(&c.model)) {
    if (!(s->input == c.prep.downsample)) {
      throw ConfigError("model.input " + s->input.to_string() + " does not match data.downsample " +
                        c.prep.downsample.to_string());
    }
  } else {
    const auto& t = std::get<models::Model2DSpec>(c.model);
    if (t.rows != c.prep.rows || t.cols != c.prep.cols) {
      throw ConfigError("model.rows/model.cols must match data.rows/data.cols");
    }
  }

  c.optim = train::OptimizerConfig::read(kv);
  c.optim.validate();
  const long long k = kv.get_int("cv.folds", static_cast<long long>(c.folds));
  if (k < 3) throw ConfigError("key 'cv.folds' must be at least 3 (one test, one validation and one training fold)");
  c.folds = static_cast<std::size_t>(k);
  c.cv_seed = get_seed(kv, "cv.seed", c.seed);
  if (!c.data_dir.empty() && !fs::is_directory(c.data_dir)) {
    throw IoError("data.dir '" + c.data_dir + "' is not a directory");
  }
  return c;
}

KeyValueFile ExperimentConfig::to_kv() const {
  KeyValueFile kv;
  kv.set("format", kConfigFormat);
  kv.set("command", command_name(command));
  kv.set("seed", std::to_string(seed));
  if (!data_dir.empty()) {
    kv.set("data.dir", data_dir);
  } else {
    kv.set("synth.n_per_class", std::to_string(synth.n_per_class));
    kv.set("synth.separation", format_number(synth.separation));
    kv.set("synth.seed", std::to_string(synth.seed));
    kv.set("synth.canvas", synth.canvas.to_string());
  }
  prep.write(kv);
  models::write_spec(model, kv);
  optim.write(kv);
  kv.set("cv.folds", std::to_string(folds));
  kv.set("cv.seed", std::to_string(cv_seed));
  return kv;
}

data::InputKind ExperimentConfig::input_kind() const {
  return std::holds_alternative<models::Model3DSpec>(model) ? data::InputKind::Volume : data::InputKind::Views;
}

data::Dataset load_data(const ExperimentConfig& config) {
  if (!config.data_dir.empty()) return data::load_dataset(config.data_dir, config.input_kind(), config.prep);
  const auto plans = synth::plan_dataset(config.synth.n_per_class, config.synth.separation, config.synth.seed);
  return data::synthetic_dataset(plans, config.synth.canvas, config.input_kind(), config.prep);
}

train::EvalReport pooled_test(const std::vector<train::FoldResult>& folds, const std::string& model) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& f : folds) {
    scores.insert(scores.end(), f.test.scores.begin(), f.test.scores.end());
    labels.insert(labels.end(), f.test.labels.begin(), f.test.labels.end());
  }
  auto r = train::report_from_scores(scores, labels);
  r.model = model;
  r.split = "test";
  return r;
}

std::string resolve_output_path(const std::string& path) {
  const char* root = std::getenv("VESSELNET_OUTPUT_ROOT");
  if (!root || !*root || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

std::unique_ptr<models::Classifier> load_model(const nn::Checkpoint& checkpoint, data::PrepConfig& prep) {
  KeyValueFile kv;
  for (const auto& [k, v] : checkpoint.meta) kv.set(k, v);
  if (!kv.has("model.kind")) throw FormatError("checkpoint has no model.kind meta entry");
  auto model = models::build_model(models::read_spec(kv), 0);
  nn::restore(checkpoint, model->parameters());
  prep = data::PrepConfig::read(kv);
  return model;
}

namespace {

struct Writer {
  fs::path dir;
  std::vector<std::vector<std::string>> score_rows;
  std::vector<train::EvalReport> reports;

  void fold_outputs(const train::FoldResult& r, const std::string& tag, const data::Dataset& ds,
                    const train::FoldPlan& plan) {
    reports.push_back(r.val);
    reports.push_back(r.test);
    const auto members = plan.members(r.fold);
    for (std::size_t i = 0; i < members.size(); ++i) {
      score_rows.push_back({tag, std::to_string(r.fold), ds.samples[members[i]].id,
                            std::to_string(r.test.labels[i]), format_number(r.test.scores[i])});
    }
  }

  void finish() {
    write_file_atomic((dir / "report.csv").string(), train::metrics_table(reports).to_string());
    write_file_atomic((dir / "scores.csv").string(),
                      csv_table_text(score_rows, {"model", "fold", "sample", "label", "score"}));
  }
};

std::string history_csv(const std::vector<train::EpochRecord>& history) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : history) {
    rows.push_back({std::to_string(e.epoch), format_number(e.train_loss), format_number(e.val_loss)});
  }
  return csv_table_text(rows, {"epoch", "train_loss", "val_loss"});
}

RunResult run_inner(const ExperimentConfig& config, const fs::path& dir, const LogLine& log) {
  const auto kv = config.to_kv();
  write_file_atomic((dir / "config.kv").string(), kv.to_string());
  if (log) log("loading data");
  const auto ds = load_data(config);
  std::vector<std::string> groups;
  for (const auto& s : ds.samples) groups.push_back(s.group);
  const auto labels = ds.labels();
  const auto plan = train::kfold_split(labels, groups, config.folds, config.cv_seed);
  write_file_atomic((dir / "folds.csv").string(), train::fold_table(plan, ds).to_string());

  Writer out{dir, {}, {}};
  RunResult result;
  std::string prefix;
  const train::EpochLogger epoch_log = [&](const train::EpochRecord& e) {
    if (log) {
      log(prefix + "epoch " + std::to_string(e.epoch) + " train_loss " + format_number(e.train_loss) + " val_loss " +
          format_number(e.val_loss));
    }
  };

  if (config.command == Command::Ablate) {
    const auto& spec = std::get<models::Model2DSpec>(config.model);
    const std::vector<std::string> views = {"frontal", "transverse", "sagittal", "all-views"};
    for (const auto& v : views) {
      prefix = v + " ";
      auto rows = train::ablate_single_view(spec, ds, plan, config.optim, config.seed, {v}, epoch_log);
      for (const auto& f : rows[0].folds) out.fold_outputs(f, v, ds, plan);
      out.reports.push_back(pooled_test(rows[0].folds, v));
      result.ablation.push_back(std::move(rows[0]));
    }
    write_file_atomic((dir / "ablation.csv").string(), train::ablation_table(result.ablation).to_string());
  } else {
    const std::string tag = models::model_kind(config.model);
    std::size_t current = 0;
    prefix = "fold 0 ";
    auto on_fold = [&](const train::FoldResult& r, models::Classifier&) {
      const fs::path fold_dir = dir / ("fold_" + std::to_string(r.fold));
      auto ck = r.training.best;
      KeyValueFile prep_kv;
      config.prep.write(prep_kv);
      for (const auto& k : prep_kv.keys()) ck.meta.emplace_back(k, prep_kv.get(k));
      ck.meta.emplace_back("cv.fold", std::to_string(r.fold));
      nn::save_checkpoint((fold_dir / "checkpoint.vnck").string(), ck);
      write_file_atomic((fold_dir / "history.csv").string(), history_csv(r.training.history));
      out.fold_outputs(r, tag, ds, plan);
      current = r.fold + 1;
      prefix = "fold " + std::to_string(current) + " ";
    };
    const auto folds = train::cross_validate(config.model, ds, plan, config.optim, config.seed, on_fold, epoch_log);
    out.reports.push_back(pooled_test(folds, tag));
  }
  out.finish();
  result.reports = out.reports;
  return result;
}

}  // namespace

RunResult run(const ExperimentConfig& config, const std::string& out_dir, const LogLine& log) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const fs::path marker = dir / "FAILED";
  fs::remove(marker);
  try {
    return run_inner(config, dir, log);
  } catch (const std::exception& e) {
    write_file_atomic(marker.string(), std::string(e.what()) + "\n");
    throw;
  }
}

}  // namespace vesselnet::experiment
