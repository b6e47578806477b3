#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <random>

#include "pad/batch.hpp"
#include "pad/explain.hpp"
#include "pad/synthetic.hpp"
#include "pad/training.hpp"

using namespace pad;
namespace fs = std::filesystem;

namespace {

std::mt19937 rng(4242);

Tensor random_tensor(std::vector<int> shape, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> dist(lo, hi);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

Tensor random_image(int size) { return random_tensor({1, 3, size, size}, 0.0f, 1.0f); }

}  // namespace

TEST_CASE("raw cam is zero when the feature maps are zero") {
  const Tensor activation = Tensor::zeros({1, 4, 6, 6});
  const Tensor grad = random_tensor({1, 4, 6, 6});
  const Tensor cam = gradcam_pp_raw(activation, grad);
  for (int64_t i = 0; i < cam.numel(); ++i) CHECK(cam[i] == 0.0f);
}

TEST_CASE("raw cam is rectified and shaped like the feature map grid") {
  const Tensor activation = random_tensor({1, 4, 6, 6}, 0.0f, 1.0f);
  const Tensor grad = random_tensor({1, 4, 6, 6});
  const Tensor cam = gradcam_pp_raw(activation, grad);
  CHECK(cam.shape() == std::vector<int>({6, 6}));
  for (int64_t i = 0; i < cam.numel(); ++i) CHECK(cam[i] >= 0.0f);
  CHECK_THROWS_AS(gradcam_pp_raw(random_tensor({2, 4, 6, 6}), random_tensor({2, 4, 6, 6})),
                  ContractError);
  CHECK_THROWS_AS(gradcam_pp_raw(activation, random_tensor({1, 4, 5, 6})), ContractError);
}

TEST_CASE("normalization maps to [0,1] and zeros out constant maps") {
  Tensor grid({3, 3});
  for (int64_t i = 0; i < grid.numel(); ++i) grid[i] = static_cast<float>(i) + 2.0f;
  const Tensor norm = normalize_heatmap(grid);
  float lo = 1.0f, hi = 0.0f;
  for (int64_t i = 0; i < norm.numel(); ++i) {
    lo = std::min(lo, norm[i]);
    hi = std::max(hi, norm[i]);
  }
  CHECK(lo == 0.0f);
  CHECK(hi == 1.0f);

  Tensor flat({3, 3});
  flat.fill(0.7f);
  const Tensor zeroed = normalize_heatmap(flat);
  for (int64_t i = 0; i < zeroed.numel(); ++i) CHECK(zeroed[i] == 0.0f);
}

TEST_CASE("upsampling matches the input spatial size") {
  const Tensor grid = random_tensor({4, 4}, 0.0f, 1.0f);
  const Tensor up = upsample_bilinear(grid, 32);
  CHECK(up.shape() == std::vector<int>({32, 32}));
}

TEST_CASE("gradcam_pp on a model obeys the output contract") {
  ModelConfig config;
  config.backbone = Backbone::toy_cnn;
  config.input_size = 32;
  PadModel model = build_classifier(config, 3);
  const Tensor image = random_image(32);
  const Heatmap heatmap = gradcam_pp(model, image, kBinaryAttackIndex, "conv3");
  CHECK(heatmap.values.shape() == std::vector<int>({32, 32}));  // input spatial shape
  CHECK(heatmap.source_layer == "conv3");
  float lo = 1.0f, hi = 0.0f;
  for (int64_t i = 0; i < heatmap.values.numel(); ++i) {
    CHECK(std::isfinite(heatmap.values[i]));
    lo = std::min(lo, heatmap.values[i]);
    hi = std::max(hi, heatmap.values[i]);
  }
  CHECK(lo >= 0.0f);
  CHECK(hi <= 1.0f);
  CHECK_THROWS_AS(gradcam_pp(model, image, 0, "gap"), ContractError);
  CHECK_THROWS_AS(gradcam_pp(model, random_tensor({2, 3, 32, 32}), 0, "conv3"), ContractError);

  // works on earlier layers and on the adversarial assembly too
  CHECK(gradcam_pp(model, image, 0, "conv1").values.dim(0) == 32);
  UaiConfig uai;
  uai.base = config;
  uai.dim_e1 = 16;
  uai.dim_e2 = 8;
  UaiModel uai_model = build_uai(uai, 3);
  CHECK(gradcam_pp(uai_model, image, 1, "conv2").values.dim(0) == 32);
}

TEST_CASE("overlay blends deterministically and keeps dimensions") {
  Heatmap heatmap;
  heatmap.values = normalize_heatmap(random_tensor({24, 24}, 0.0f, 1.0f));
  cv::Mat image(24, 24, CV_8UC3);
  cv::randu(image, 0, 255);

  const cv::Mat a = overlay(heatmap, image, 0.45);
  const cv::Mat b = overlay(heatmap, image, 0.45);
  CHECK(a.size() == image.size());
  CHECK(cv::countNonZero(cv::Mat(a != b).reshape(1)) == 0);  // identical bytes

  // opacity -> 0 limit returns the original image
  const cv::Mat faint = overlay(heatmap, image, 1e-4);
  CHECK(cv::countNonZero(cv::Mat(faint != image).reshape(1)) == 0);

  cv::Mat wrong(12, 24, CV_8UC3);
  CHECK_THROWS_AS(overlay(heatmap, wrong, 0.5), ContractError);
  CHECK_THROWS_AS(overlay(heatmap, image, 0.0), ContractError);
}

TEST_CASE("heatmap argmax lands on the background cue of a trained model") {
  // desk-scale version of the localization check: train with background on
  // bezel-cue attacks, then explain a handful of correctly-classified ones
  const fs::path dir = fs::temp_directory_path() / "pad_explain_loc";
  fs::remove_all(dir);
  SyntheticConfig config;
  config.n_subjects = 5;
  config.videos_per_subject = 8;
  config.frames_per_video = 5;
  config.image_size = 32;
  config.cue_strength = 0.9;
  config.attack_codes = {3};
  config.background_cue_classes = {3};
  config.seed = 31;
  const auto [full, crop] = generate_synthetic(config, dir);

  ModelConfig model_config;
  model_config.backbone = Backbone::toy_cnn;
  model_config.input_size = 32;
  PadModel model = build_classifier(model_config, 8);
  TrainConfig train;
  train.strategy = Strategy::bc;
  train.epochs = 10;
  train.batch_size = 8;
  train.seed = 8;
  train_classifier(model, full, train);

  const cv::Rect cue = synthetic_cue_box(3, config.image_size);
  int correct = 0, localized = 0;
  for (const auto& r : full.records) {
    if (r.split != Split::test || r.attack_code != 3) continue;
    const Tensor image = load_images({&r}, 32);
    if (model.attack_probs(image)[0] < 0.5) continue;
    ++correct;
    const Heatmap heatmap = gradcam_pp(model, image, kBinaryAttackIndex, model.default_cam_layer());
    const auto [y, x] = heatmap_argmax(heatmap);
    const cv::Rect inflated(cue.x - 2, cue.y - 2, cue.width + 4, cue.height + 4);
    if (inflated.contains(cv::Point(x, y))) ++localized;
  }
  REQUIRE(correct >= 10);
  CHECK(localized * 10 >= correct * 8);  // >= 80 percent
  fs::remove_all(dir);
}

TEST_CASE("write_explanation produces the png and sidecar") {
  const fs::path dir = fs::temp_directory_path() / "pad_explain_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Heatmap heatmap;
  heatmap.values = normalize_heatmap(random_tensor({16, 16}, 0.0f, 1.0f));
  heatmap.target_class = 1;
  heatmap.source_layer = "conv3";
  cv::Mat image(16, 16, CV_8UC3, cv::Scalar(128, 128, 128));
  write_explanation(dir / "sample", overlay(heatmap, image, 0.4), heatmap, 0.87);
  CHECK(fs::exists(dir / "sample.png"));
  CHECK(fs::exists(dir / "sample.json"));
  fs::remove_all(dir);
}
