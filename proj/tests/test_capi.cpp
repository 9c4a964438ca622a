#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <thread>

#include "vesselnet/vesselnet.h"

namespace fs = std::filesystem;

TEST_CASE("volume handles") {
  vn_volume* v = nullptr;
  REQUIRE(vn_volume_create(3, 4, 5, &v) == VN_OK);
  uint32_t dims[3];
  REQUIRE(vn_volume_dims(v, dims) == VN_OK);
  CHECK(dims[0] == 3);
  CHECK(dims[2] == 5);
  CHECK(vn_volume_set(v, 2, 3, 4, 1) == VN_OK);
  int on = 0;
  CHECK(vn_volume_get(v, 2, 3, 4, &on) == VN_OK);
  CHECK(on == 1);
  CHECK(vn_volume_get(v, 3, 0, 0, &on) == VN_ERR_INVALID_ARGUMENT);
  CHECK(std::string(vn_last_error()).find("outside 3x4x5") != std::string::npos);
  uint64_t count = 0;
  CHECK(vn_volume_count(v, &count) == VN_OK);
  CHECK(count == 1);

  const auto path = (fs::temp_directory_path() / "vesselnet_capi_volume.vmk").string();
  REQUIRE(vn_volume_save(v, path.c_str()) == VN_OK);
  vn_volume* back = nullptr;
  REQUIRE(vn_volume_load(path.c_str(), &back) == VN_OK);
  vn_seg_result r;
  REQUIRE(vn_segeval(back, v, &r) == VN_OK);
  CHECK(r.tp == 1);
  CHECK(r.dice == 1.0);
  vn_volume_free(back);
  vn_volume_free(v);
  vn_volume_free(nullptr);

  CHECK(vn_volume_load("/definitely/not/here.vmk", &back) == VN_ERR_IO);
  CHECK(vn_volume_dims(nullptr, dims) == VN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("last error is per thread") {
  vn_volume* v = nullptr;
  CHECK(vn_volume_load("/nope/a.vmk", &v) == VN_ERR_IO);
  std::string other;
  std::thread t([&] {
    vn_volume_dims(nullptr, nullptr);
    other = vn_last_error();
  });
  t.join();
  CHECK(std::string(vn_last_error()).find("/nope/a.vmk") != std::string::npos);
  CHECK(other.find("NULL") != std::string::npos);
}

TEST_CASE("experiment, model load and logits") {
  const fs::path root = fs::temp_directory_path() / "vesselnet_capi_tests";
  fs::remove_all(root);
  const std::string config =
      "synth.n_per_class = 4\ndata.downsample = 32x16x32\nmodel.stem = 4,3,2\nmodel.stage.1 = 4,1,3,1,1\n"
      "model.stage.2 = 8,1,3,2,6\nmodel.head = 8\noptim.epochs = 1\noptim.learning_rate = 0.01\ncv.folds = 3\n";
  char buf[4096];
  REQUIRE(vn_experiment_check("train3d", config.c_str(), "inline", buf, sizeof(buf)) == VN_OK);
  CHECK(std::string(buf).find("model.kind = efficientnet3d") != std::string::npos);
  CHECK(vn_experiment_check("train3d", config.c_str(), "inline", buf, 8) == VN_ERR_INVALID_ARGUMENT);
  CHECK(vn_experiment_check("train9d", config.c_str(), "inline", nullptr, 0) == VN_ERR_INVALID_ARGUMENT);
  CHECK(vn_experiment_check("train2d", config.c_str(), "inline", nullptr, 0) == VN_ERR_CONFIG);

  int lines = 0;
  const auto out = (root / "exp").string();
  REQUIRE(vn_experiment_run("train3d", config.c_str(), "inline", out.c_str(),
                            [](const char*, void* user) { ++*static_cast<int*>(user); }, &lines) == VN_OK);
  CHECK(lines >= 3);

  vn_model* model = nullptr;
  REQUIRE(vn_model_load((root / "exp" / "fold_0" / "checkpoint.vnck").c_str(), &model) == VN_OK);
  const char* kind = nullptr;
  REQUIRE(vn_model_kind(model, &kind) == VN_OK);
  CHECK(std::string(kind) == "efficientnet3d");

  vn_volume* v = nullptr;
  REQUIRE(vn_volume_create(64, 32, 64, &v) == VN_OK);
  vn_volume_set(v, 10, 10, 10, 1);
  float logits[2], again[2];
  size_t n = 0;
  REQUIRE(vn_model_logits(model, v, logits, 2, &n) == VN_OK);
  CHECK(n == 2);
  REQUIRE(vn_model_logits(model, v, again, 2, &n) == VN_OK);
  CHECK(std::memcmp(logits, again, sizeof(logits)) == 0);
  CHECK(std::isfinite(logits[0]));
  CHECK(vn_model_logits(model, v, logits, 1, &n) == VN_ERR_INVALID_ARGUMENT);

  REQUIRE(vn_synth_write((root / "ds").c_str(), 2, 1.0, 3, nullptr) == VN_OK);
  double auc = 0;
  REQUIRE(vn_model_evaluate(model, (root / "ds").c_str(), (root / "eval.csv").c_str(), nullptr, &auc) == VN_OK);
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);
  vn_volume_free(v);
  vn_model_free(model);
}
