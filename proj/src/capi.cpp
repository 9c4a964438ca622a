#include "vesselnet/vesselnet.h"

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>

#include "vesselnet/experiment.hpp"

using namespace vesselnet;

struct vn_volume {
  MaskVolume volume;
};

struct vn_model {
  std::unique_ptr<models::Classifier> classifier;
  data::PrepConfig prep;
  std::string kind;
};

namespace {

thread_local std::string g_last_error;

vn_status fail(vn_status status, const std::string& message) {
  g_last_error = message;
  for (auto& c : g_last_error) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return status;
}

template <class F>
vn_status guarded(F&& body) {
  try {
    body();
    return VN_OK;
  } catch (const ConfigError& e) {
    return fail(VN_ERR_CONFIG, e.what());
  } catch (const nn::ShapeError& e) {
    return fail(VN_ERR_SHAPE, e.what());
  } catch (const IoError& e) {
    return fail(VN_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(VN_ERR_IO, e.what());
  } catch (const FormatError& e) {
    return fail(VN_ERR_FORMAT, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(VN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(VN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(VN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VN_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (!p) throw std::invalid_argument(std::string(name) + " is NULL");
}

std::string out_path(const char* path) { return experiment::resolve_output_path(path); }

bool parse_command(const char* name, experiment::Command& out) {
  const std::string s = name ? name : "";
  if (s == "train3d") out = experiment::Command::Train3D;
  else if (s == "train2d") out = experiment::Command::Train2D;
  else if (s == "ablate") out = experiment::Command::Ablate;
  else return false;
  return true;
}

experiment::ExperimentConfig parse_config(const char* command, const char* config_text, const char* origin) {
  require(config_text, "config_text");
  experiment::Command c;
  if (!parse_command(command, c)) {
    throw std::invalid_argument(std::string("unknown experiment command '") + (command ? command : "") + "'");
  }
  const auto kv = KeyValueFile::parse(config_text, origin ? origin : "<config>");
  return experiment::ExperimentConfig::from_kv(c, kv);
}

void copy_out(const std::string& text, char* buf, size_t cap) {
  if (!buf) return;
  if (text.size() + 1 > cap) throw std::invalid_argument("output buffer too small (" + std::to_string(text.size() + 1) + " bytes needed)");
  std::memcpy(buf, text.c_str(), text.size() + 1);
}

void check_index(const MaskVolume& v, uint32_t d, uint32_t h, uint32_t w) {
  const auto& dims = v.dims();
  if (d >= dims.depth || h >= dims.height || w >= dims.width) {
    throw std::out_of_range("voxel (" + std::to_string(d) + "," + std::to_string(h) + "," + std::to_string(w) +
                            ") is outside " + dims.to_string());
  }
}

}  // namespace

extern "C" {

const char* vn_version(void) { return "0.1.0"; }

const char* vn_status_name(vn_status status) {
  switch (status) {
    case VN_OK: return "ok";
    case VN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case VN_ERR_IO: return "i/o error";
    case VN_ERR_FORMAT: return "format error";
    case VN_ERR_CONFIG: return "config error";
    case VN_ERR_SHAPE: return "shape error";
    case VN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* vn_last_error(void) { return g_last_error.c_str(); }

vn_status vn_output_path(const char* path, char* buf, size_t cap) {
  return guarded([&] {
    require(path, "path");
    copy_out(out_path(path), buf, cap);
  });
}

vn_status vn_volume_create(uint32_t depth, uint32_t height, uint32_t width, vn_volume** out) {
  return guarded([&] {
    require(out, "out");
    *out = new vn_volume{MaskVolume(Dims{depth, height, width})};
  });
}

vn_status vn_volume_load(const char* path, vn_volume** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new vn_volume{load_volume(path)};
  });
}

vn_status vn_volume_save(const vn_volume* volume, const char* path) {
  return guarded([&] {
    require(volume, "volume");
    require(path, "path");
    save_volume(out_path(path), volume->volume);
  });
}

vn_status vn_volume_dims(const vn_volume* volume, uint32_t dims[3]) {
  return guarded([&] {
    require(volume, "volume");
    require(dims, "dims");
    dims[0] = volume->volume.dims().depth;
    dims[1] = volume->volume.dims().height;
    dims[2] = volume->volume.dims().width;
  });
}

vn_status vn_volume_get(const vn_volume* volume, uint32_t d, uint32_t h, uint32_t w, int* on) {
  return guarded([&] {
    require(volume, "volume");
    require(on, "on");
    check_index(volume->volume, d, h, w);
    *on = volume->volume.at(d, h, w) ? 1 : 0;
  });
}

vn_status vn_volume_set(vn_volume* volume, uint32_t d, uint32_t h, uint32_t w, int on) {
  return guarded([&] {
    require(volume, "volume");
    check_index(volume->volume, d, h, w);
    volume->volume.set(d, h, w, on != 0);
  });
}

vn_status vn_volume_count(const vn_volume* volume, uint64_t* count) {
  return guarded([&] {
    require(volume, "volume");
    require(count, "count");
    *count = volume->volume.count_set();
  });
}

void vn_volume_free(vn_volume* volume) { delete volume; }

vn_status vn_project_pgm(const vn_volume* volume, const uint32_t* downsample, size_t rows, size_t cols,
                         const char* prefix) {
  return guarded([&] {
    require(volume, "volume");
    require(prefix, "prefix");
    if ((rows == 0) != (cols == 0)) throw std::invalid_argument("rows and cols must both be zero or both positive");
    const MaskVolume* src = &volume->volume;
    MaskVolume small;
    if (downsample) {
      small = downsample_mask(volume->volume, Dims{downsample[0], downsample[1], downsample[2]});
      src = &small;
    }
    auto views = orthographic_project(*src);
    if (rows) views = resize_views(views, rows, cols);
    const std::string base = out_path(prefix);
    std::filesystem::path parent = std::filesystem::path(base).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    for (View v : kAllViews) write_pgm(base + "_" + view_name(v) + ".pgm", views.get(v));
  });
}

vn_status vn_segeval(const vn_volume* prediction, const vn_volume* truth, vn_seg_result* out) {
  return guarded([&] {
    require(prediction, "prediction");
    require(truth, "truth");
    require(out, "out");
    if (!(prediction->volume.dims() == truth->volume.dims())) {
      throw nn::ShapeError("prediction is " + prediction->volume.dims().to_string() + " but truth is " +
                           truth->volume.dims().to_string());
    }
    const auto c = confusion_counts(prediction->volume, truth->volume);
    *out = vn_seg_result{c.tp, c.fp, c.fn, c.tn, dice(c), jaccard(c)};
  });
}

vn_status vn_roc_plot(const char* scores_csv, const char* filter_column, const char* filter_value,
                      const char* svg_path, const char* points_csv, const char* title, double* auc) {
  return guarded([&] {
    require(scores_csv, "scores_csv");
    require(svg_path, "svg_path");
    if ((filter_column == nullptr) != (filter_value == nullptr)) {
      throw std::invalid_argument("filter column and value must be given together");
    }
    const auto table = CsvTable::parse(read_file(scores_csv), scores_csv);
    const std::size_t sc = table.column("score"), lc = table.column("label");
    const std::size_t fc = filter_column ? table.column(filter_column) : 0;
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      if (filter_column && row[fc] != filter_value) continue;
      const std::string where = std::string(scores_csv) + ": row " + std::to_string(r + 2);
      double s = 0;
      int l = 0;
      auto rs = std::from_chars(row[sc].data(), row[sc].data() + row[sc].size(), s);
      auto rl = std::from_chars(row[lc].data(), row[lc].data() + row[lc].size(), l);
      if (rs.ec != std::errc() || rs.ptr != row[sc].data() + row[sc].size()) throw FormatError(where + ": bad score '" + row[sc] + "'");
      if (rl.ec != std::errc() || rl.ptr != row[lc].data() + row[lc].size() || (l != 0 && l != 1)) {
        throw FormatError(where + ": label must be 0 or 1, got '" + row[lc] + "'");
      }
      scores.push_back(s);
      labels.push_back(l);
    }
    if (scores.empty()) throw std::invalid_argument(std::string(scores_csv) + ": no rows selected");
    const auto curve = roc_auc(scores, labels);
    write_file_atomic(out_path(svg_path), roc_svg(curve, title ? title : "ROC"));
    if (points_csv) write_file_atomic(out_path(points_csv), roc_points_csv(curve));
    if (auc) *auc = curve.auc;
  });
}

vn_status vn_synth_write(const char* dir, size_t n_per_class, double separation, uint64_t seed,
                         const uint32_t* canvas) {
  return guarded([&] {
    require(dir, "dir");
    synth::DatasetConfig cfg;
    if (canvas) cfg.canvas = Dims{canvas[0], canvas[1], canvas[2]};
    synth::write_dataset(out_path(dir), n_per_class, separation, seed, cfg);
  });
}

vn_status vn_experiment_check(const char* command, const char* config_text, const char* origin, char* buf,
                              size_t cap) {
  return guarded([&] {
    const auto config = parse_config(command, config_text, origin);
    copy_out(config.to_kv().to_string(), buf, cap);
  });
}

vn_status vn_experiment_run(const char* command, const char* config_text, const char* origin, const char* out_dir,
                            vn_log_fn log, void* user) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto config = parse_config(command, config_text, origin);
    experiment::LogLine line;
    if (log) line = [&](const std::string& s) { log(s.c_str(), user); };
    experiment::run(config, out_path(out_dir), line);
  });
}

vn_status vn_model_load(const char* checkpoint_path, vn_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    auto m = std::make_unique<vn_model>();
    m->classifier = experiment::load_model(nn::load_checkpoint(checkpoint_path), m->prep);
    m->kind = models::model_kind(m->classifier->spec());
    *out = m.release();
  });
}

vn_status vn_model_kind(const vn_model* model, const char** kind) {
  return guarded([&] {
    require(model, "model");
    require(kind, "kind");
    *kind = model->kind.c_str();
  });
}

vn_status vn_model_logits(vn_model* model, const vn_volume* volume, float* out, size_t cap, size_t* count) {
  return guarded([&] {
    require(model, "model");
    require(volume, "volume");
    require(count, "count");
    const bool views = model->kind == "cnn2d";
    data::Dataset ds;
    ds.sample_shape = data::sample_shape(views ? data::InputKind::Views : data::InputKind::Volume, model->prep);
    ds.samples.push_back({"input", "input", 0,
                          views ? data::views_input(volume->volume, model->prep)
                                : data::volume_input(volume->volume, model->prep)});
    nn::NoGradGuard guard;
    Rng unused(0);
    const std::size_t idx = 0;
    const auto logits = model->classifier->forward(data::make_batch(ds, {&idx, 1}), nn::Mode::Eval, unused);
    const auto values = logits.data();
    *count = values.size();
    if (values.size() > cap) throw std::invalid_argument("logit buffer holds " + std::to_string(cap) + " floats, need " + std::to_string(values.size()));
    require(out, "out");
    std::copy(values.begin(), values.end(), out);
  });
}

vn_status vn_model_evaluate(vn_model* model, const char* data_dir, const char* report_csv, const char* scores_csv,
                            double* auc) {
  return guarded([&] {
    require(model, "model");
    require(data_dir, "data_dir");
    require(report_csv, "report_csv");
    const auto kind = model->kind == "cnn2d" ? data::InputKind::Views : data::InputKind::Volume;
    const auto ds = data::load_dataset(data_dir, kind, model->prep);
    if (ds.sample_shape != model->classifier->sample_shape()) {
      throw nn::ShapeError("dataset samples " + nn::shape_string(ds.sample_shape) + " do not match the model input " +
                           nn::shape_string(model->classifier->sample_shape()));
    }
    auto report = train::evaluate(*model->classifier, ds);
    report.split = "eval";
    write_file_atomic(out_path(report_csv), train::metrics_table({report}).to_string());
    if (scores_csv) {
      CsvTable t;
      t.header = {"sample", "label", "score"};
      for (std::size_t i = 0; i < ds.size(); ++i) {
        t.rows.push_back({ds.samples[i].id, std::to_string(report.labels[i]), format_number(report.scores[i])});
      }
      write_file_atomic(out_path(scores_csv), t.to_string());
    }
    if (auc) *auc = report.auc().value_or(std::numeric_limits<double>::quiet_NaN());
  });
}

void vn_model_free(vn_model* model) { delete model; }

}  // extern "C"
