// Command-line front end. Links only the C API in vesselnet.h.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vesselnet/vesselnet.h"

namespace {

constexpr int kUsageExit = 64;

std::string g_command;

std::string prefix() { return g_command.empty() ? "vesselnet" : "vesselnet " + g_command; }

struct Failure {
  int code;
};

void check(vn_status s) {
  if (s == VN_OK) return;
  std::cerr << prefix() << ": " << vn_status_name(s) << ": " << vn_last_error() << "\n";
  throw Failure{static_cast<int>(s)};
}

[[noreturn]] void usage_error(const std::string& message) {
  std::cerr << "vesselnet " << g_command << ": usage: " << message << "\n";
  throw Failure{kUsageExit};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << prefix() << ": " << vn_status_name(VN_ERR_IO) << ": cannot open '" << path << "'\n";
    throw Failure{VN_ERR_IO};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_dims(const std::string& text, uint32_t out[3]) {
  unsigned a = 0, b = 0, c = 0;
  char x1 = 0, x2 = 0, extra = 0;
  if (std::sscanf(text.c_str(), "%u%c%u%c%u%c", &a, &x1, &b, &x2, &c, &extra) != 5) return false;
  if (x1 != 'x' || x2 != 'x' || a == 0 || b == 0 || c == 0) return false;
  out[0] = a;
  out[1] = b;
  out[2] = c;
  return true;
}

struct Volume {
  vn_volume* handle = nullptr;
  explicit Volume(const std::string& path) { check(vn_volume_load(path.c_str(), &handle)); }
  ~Volume() { vn_volume_free(handle); }
  Volume(const Volume&) = delete;
  Volume& operator=(const Volume&) = delete;
};

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::vector<char> resolved(4096);
  check(vn_output_path(path.c_str(), resolved.data(), resolved.size()));
  const std::filesystem::path p(resolved.data());
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << prefix() << ": " << vn_status_name(VN_ERR_IO) << ": cannot write '" << p.string()
              << "'\n";
    throw Failure{VN_ERR_IO};
  }
}

void log_line(const char* line, void*) { std::cerr << line << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glaucoma classification from binary vessel-mask volumes.\n"
               "Exit codes: 0 ok, 2 invalid argument, 3 i/o, 4 format, 5 config, 6 shape, 7 internal, 64 usage.\n"
               "VESSELNET_OUTPUT_ROOT, when set, prefixes every relative output path.",
               "vesselnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vn_version());

  auto* synth = app.add_subcommand("synth", "write a labelled synthetic dataset directory (VMK1 volumes + manifest.csv)");
  std::string synth_out, synth_canvas;
  std::size_t n_per_class = 100;
  double separation = 1.0;
  uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "dataset directory")->required();
  synth->add_option("--n-per-class", n_per_class, "subjects per class")->capture_default_str();
  synth->add_option("--separation", separation, "class separation in [0,1]")->capture_default_str();
  synth->add_option("--seed", synth_seed, "master seed")->capture_default_str();
  synth->add_option("--canvas", synth_canvas, "volume size DxHxW (default 256x128x256)");

  auto* project = app.add_subcommand("project", "write frontal/transverse/sagittal PGMs for each volume");
  std::vector<std::string> project_inputs;
  std::string project_out = ".", project_down;
  std::size_t rows = 0, cols = 0;
  project->add_option("volumes", project_inputs, "VMK1 volume files")->required();
  project->add_option("--out", project_out, "output directory")->capture_default_str();
  project->add_option("--rows", rows, "resize rows (0 keeps native size)")->capture_default_str();
  project->add_option("--cols", cols, "resize columns (0 keeps native size)")->capture_default_str();
  project->add_option("--downsample", project_down, "OR-downsample to DxHxW before projecting");

  std::string config_path, exp_out;
  bool dry_run = false;
  std::vector<CLI::App*> experiments;
  for (const char* name : {"train3d", "train2d", "ablate"}) {
    std::string help = std::string(name) == "train3d"   ? "cross-validated EfficientNet3D training"
                       : std::string(name) == "train2d" ? "cross-validated multi-view 2D CNN training"
                                                        : "single-view ablation (frontal, transverse, sagittal, all-views)";
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config (key = value file)")->required();
    sub->add_option("--out", exp_out, "experiment directory")->required();
    sub->add_flag("--dry-run", dry_run, "validate the config and print it resolved");
    experiments.push_back(sub);
  }

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
  std::string eval_ck, eval_data, eval_out, eval_scores;
  eval->add_option("--checkpoint", eval_ck, "checkpoint file (.vnck)")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "report CSV")->required();
  eval->add_option("--scores", eval_scores, "per-sample scores CSV");

  auto* segeval = app.add_subcommand("segeval", "Dice/Jaccard of prediction/truth mask pairs");
  std::vector<std::string> preds, truths;
  std::string seg_out;
  segeval->add_option("--pred", preds, "predicted mask (repeatable)")->required();
  segeval->add_option("--truth", truths, "reference mask (repeatable, paired in order)")->required();
  segeval->add_option("--out", seg_out, "CSV path (default stdout)");

  auto* roc = app.add_subcommand("roc-plot", "ROC curve SVG from a CSV with score and label columns");
  std::string roc_in, roc_out, roc_points, roc_title = "ROC", roc_model;
  roc->add_option("--scores", roc_in, "scores CSV (e.g. scores.csv of an experiment)")->required();
  roc->add_option("--out", roc_out, "SVG path")->required();
  roc->add_option("--points", roc_points, "also write fpr,tpr points CSV");
  roc->add_option("--title", roc_title, "plot title")->capture_default_str();
  roc->add_option("--model", roc_model, "keep rows whose model column equals this tag");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      for (auto* sub : app.get_subcommands()) {
        if (!sub->get_name().empty()) g_command = sub->get_name();
      }
      std::string msg = e.what();
      for (auto& c : msg) {
        if (c == '\n') c = ' ';
      }
      usage_error(msg + " (see --help)");
    }
    g_command = app.get_subcommands().front()->get_name();

    if (synth->parsed()) {
      uint32_t canvas[3];
      if (!synth_canvas.empty() && !parse_dims(synth_canvas, canvas)) usage_error("--canvas expects DxHxW");
      check(vn_synth_write(synth_out.c_str(), n_per_class, separation, synth_seed,
                           synth_canvas.empty() ? nullptr : canvas));
      return 0;
    }

    if (project->parsed()) {
      uint32_t down[3];
      if (!project_down.empty() && !parse_dims(project_down, down)) usage_error("--downsample expects DxHxW");
      for (const auto& in : project_inputs) {
        Volume v(in);
        const auto prefix = (std::filesystem::path(project_out) / std::filesystem::path(in).stem()).string();
        check(vn_project_pgm(v.handle, project_down.empty() ? nullptr : down, rows, cols, prefix.c_str()));
      }
      return 0;
    }

    for (auto* sub : experiments) {
      if (!sub->parsed()) continue;
      const std::string text = read_text(config_path);
      if (dry_run) {
        std::vector<char> buf(1 << 16);
        check(vn_experiment_check(sub->get_name().c_str(), text.c_str(), config_path.c_str(), buf.data(), buf.size()));
        std::cout << buf.data();
        return 0;
      }
      check(vn_experiment_run(sub->get_name().c_str(), text.c_str(), config_path.c_str(), exp_out.c_str(), log_line,
                              nullptr));
      return 0;
    }

    if (eval->parsed()) {
      vn_model* model = nullptr;
      check(vn_model_load(eval_ck.c_str(), &model));
      double auc = 0;
      const vn_status s = vn_model_evaluate(model, eval_data.c_str(), eval_out.c_str(),
                                            eval_scores.empty() ? nullptr : eval_scores.c_str(), &auc);
      vn_model_free(model);
      check(s);
      return 0;
    }

    if (segeval->parsed()) {
      if (preds.size() != truths.size()) usage_error("--pred and --truth must be given the same number of times");
      std::string csv = "prediction,truth,tp,fp,fn,tn,dice,jaccard\n";
      for (std::size_t i = 0; i < preds.size(); ++i) {
        Volume p(preds[i]), t(truths[i]);
        vn_seg_result r;
        check(vn_segeval(p.handle, t.handle, &r));
        csv += preds[i] + "," + truths[i] + "," + std::to_string(r.tp) + "," + std::to_string(r.fp) + "," +
               std::to_string(r.fn) + "," + std::to_string(r.tn) + "," + format_double(r.dice) + "," +
               format_double(r.jaccard) + "\n";
      }
      if (seg_out.empty()) std::cout << csv;
      else write_text(seg_out, csv);
      return 0;
    }

    if (roc->parsed()) {
      double auc = 0;
      check(vn_roc_plot(roc_in.c_str(), roc_model.empty() ? nullptr : "model",
                        roc_model.empty() ? nullptr : roc_model.c_str(), roc_out.c_str(),
                        roc_points.empty() ? nullptr : roc_points.c_str(), roc_title.c_str(), &auc));
      std::cout << "auc," << format_double(auc) << "\n";
      return 0;
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << prefix() << ": " << vn_status_name(VN_ERR_INTERNAL) << ": " << e.what() << "\n";
    return VN_ERR_INTERNAL;
  }
  return kUsageExit;
}
