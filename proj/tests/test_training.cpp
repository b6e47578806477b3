#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <random>

#include "pad/synthetic.hpp"
#include "pad/training.hpp"

using namespace pad;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct SynthFixture {
  fs::path dir;
  DatasetManifest full;
  DatasetManifest crop;

  SynthFixture() {
    dir = fresh_dir("pad_training_synth");
    SyntheticConfig config;
    config.n_subjects = 3;
    config.videos_per_subject = 6;
    config.frames_per_video = 3;
    config.image_size = 32;
    config.cue_strength = 0.9;
    config.attack_codes = {3, 4};
    config.background_cue_classes = {3, 4};
    config.seed = 5;
    auto pair = generate_synthetic(config, dir);
    full = std::move(pair.first);
    crop = std::move(pair.second);
  }
  ~SynthFixture() { fs::remove_all(dir); }
};

const SynthFixture& fixture() {
  static SynthFixture f;
  return f;
}

ModelConfig toy_config(HeadSetup heads = HeadSetup::binary_only) {
  ModelConfig c;
  c.backbone = Backbone::toy_cnn;
  c.input_size = 32;
  c.heads = heads;
  return c;
}

TrainConfig quick_config(Strategy strategy, int epochs = 3, uint64_t seed = 1) {
  TrainConfig c;
  c.strategy = strategy;
  c.epochs = epochs;
  c.batch_size = 8;
  c.seed = seed;
  return c;
}

UaiConfig small_uai(HeadSetup heads = HeadSetup::binary_only) {
  UaiConfig c;
  c.base = toy_config(heads);
  c.dim_e1 = 16;
  c.dim_e2 = 8;
  return c;
}

// a bespoke manifest of rendered frames, for the DFS scenarios
struct SceneVideo {
  int subject = 0;
  int video = 0;
  bool attack = false;
  int frames = 10;
  int cue_from = 10;  // frames >= cue_from carry the artifact
};

DatasetManifest render_scene(const fs::path& dir, const std::vector<SceneVideo>& videos,
                             int image_size, uint64_t seed) {
  DatasetManifest m;
  m.name = "synthetic";
  for (const auto& v : videos) {
    char video_id[32];
    std::snprintf(video_id, sizeof(video_id), "s%02d_v%02d", v.subject, v.video);
    for (int f = 0; f < v.frames; ++f) {
      FrameRenderSpec spec;
      spec.image_size = image_size;
      spec.subject_id = v.subject;
      spec.video_index = v.video;
      spec.frame_index = f;
      spec.attack_code = v.attack ? 3 : 0;
      spec.background_cue = true;
      spec.cue_strength = 0.9;
      spec.seed = seed;
      spec.draw_artifact = v.attack && f >= v.cue_from;
      const cv::Mat img = render_synthetic_frame(spec);
      const fs::path path = dir / (std::string(video_id) + "_" + std::to_string(f) + ".png");
      REQUIRE(cv::imwrite(path.string(), img));
      SampleRecord r;
      r.image_ref = path.string();
      r.subject_id = v.subject;
      r.video_id = video_id;
      r.frame_index = f;
      r.attack_code = v.attack ? 3 : 0;
      r.is_attack = v.attack;
      r.variant = Variant::full;
      r.split = Split::train;
      m.records.push_back(std::move(r));
    }
  }
  rebuild_codes_present(&m);
  return m;
}

}  // namespace

TEST_CASE("select_training_frames follows the argmin/argmax-3 rule") {
  const std::vector<double> probs = {0.9, 0.1, 0.8, 0.2, 0.3};
  CHECK(select_training_frames(probs, true) == std::vector<int>({1, 3, 4}));
  CHECK(select_training_frames(probs, false) == std::vector<int>({0, 2, 4}));
  CHECK(select_training_frames({0.5, 0.5, 0.5, 0.5}, true) == std::vector<int>({0, 1, 2}));
  CHECK(select_training_frames({0.5, 0.5, 0.5, 0.5}, false) == std::vector<int>({0, 1, 2}));
  CHECK_THROWS_AS(select_training_frames({0.1, 0.2}, true), ContractError);
}

TEST_CASE("selection rules agree with a sort-based oracle") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 20);
    std::vector<double> probs(static_cast<size_t>(n));
    for (auto& p : probs) p = trial % 4 == 0 ? std::round(dist(rng) * 4) / 4 : dist(rng);
    const bool attack = rng() % 2 == 0;

    // oracle: stable sort of (prob, index) pairs
    std::vector<std::pair<double, int>> keyed;
    for (int i = 0; i < n; ++i)
      keyed.emplace_back(attack ? probs[static_cast<size_t>(i)] : -probs[static_cast<size_t>(i)], i);
    std::stable_sort(keyed.begin(), keyed.end());
    std::vector<int> expect = {keyed[0].second, keyed[1].second, keyed[2].second};
    std::sort(expect.begin(), expect.end());
    CHECK(select_training_frames(probs, attack) == expect);

    int best = 0;
    for (int i = 1; i < n; ++i)
      if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
    CHECK(select_test_frame(probs) == best);
  }
}

TEST_CASE("select_test_frame edge cases") {
  CHECK(select_test_frame({0.2, 0.9, 0.4}) == 1);
  CHECK(select_test_frame({0.7}) == 0);
  CHECK(select_test_frame({0.4, 0.4, 0.4}) == 0);
  CHECK_THROWS_AS(select_test_frame({}), ContractError);
}

TEST_CASE("group_videos orders frames and rejects mixed labels") {
  const auto videos = group_videos(fixture().full, Split::train);
  CHECK(videos.size() == 12);  // 2 train subjects x 6 videos
  for (const auto& v : videos) {
    CHECK(v.frames.size() == 3);
    for (size_t i = 1; i < v.frames.size(); ++i)
      CHECK(v.frames[i]->frame_index > v.frames[i - 1]->frame_index);
    for (const auto* f : v.frames) CHECK(f->is_attack == v.is_attack);
  }

  DatasetManifest mixed = fixture().full;
  for (auto& r : mixed.records)
    if (r.video_id == videos[0].video_id && r.frame_index == 1) {
      r.attack_code = r.attack_code == 0 ? 3 : 0;
      r.is_attack = !r.is_attack;
    }
  CHECK_THROWS_AS(group_videos(mixed, Split::train), ContractError);
}

TEST_CASE("train config validation") {
  TrainConfig c = quick_config(Strategy::bc);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(validate_train_config(c), ConfigError);
  c = quick_config(Strategy::bc);
  c.optimizer = "sgd";
  CHECK_THROWS_AS(validate_train_config(c), ConfigError);
  c = quick_config(Strategy::dfs);
  c.dfs_frames_per_video = 5;
  CHECK_THROWS_AS(validate_train_config(c), ConfigError);
}

TEST_CASE("classifier training descends on separable synthetic data") {
  PadModel model = build_classifier(toy_config(), 1);
  const LossLog log = train_classifier(model, fixture().full, quick_config(Strategy::bc, 5));
  REQUIRE(log.size() == 5);
  CHECK(log.back().loss < log.front().loss);
  for (const auto& e : log) CHECK(e.phase == "train");
}

TEST_CASE("mt training needs a multiclass head and descends on its own objective") {
  PadModel binary_only = build_classifier(toy_config(), 1);
  CHECK_THROWS_AS(
      train_classifier(binary_only, fixture().full, quick_config(Strategy::mt)), ConfigError);

  PadModel model = build_classifier(toy_config(HeadSetup::binary_plus_multiclass), 1);
  const LossLog log = train_classifier(model, fixture().full, quick_config(Strategy::mt, 3));
  CHECK(log.back().loss < log.front().loss);
}

TEST_CASE("same seed, same loss log; different seed differs") {
  PadModel a = build_classifier(toy_config(), 7);
  PadModel b = build_classifier(toy_config(), 7);
  const LossLog log_a = train_classifier(a, fixture().full, quick_config(Strategy::bc, 2, 42));
  const LossLog log_b = train_classifier(b, fixture().full, quick_config(Strategy::bc, 2, 42));
  REQUIRE(log_a.size() == log_b.size());
  for (size_t i = 0; i < log_a.size(); ++i) CHECK(log_a[i].loss == log_b[i].loss);

  PadModel c = build_classifier(toy_config(), 7);
  const LossLog log_c = train_classifier(c, fixture().full, quick_config(Strategy::bc, 2, 43));
  CHECK(log_a[0].loss != log_c[0].loss);
}

TEST_CASE("adversarial phases touch only their own parameter group") {
  UaiModel model = build_uai(small_uai(), 3);
  BatchStream stream(fixture().full, Split::train, 32, 8, 1);
  Batch batch;
  stream.for_each_batch(0, [&](const Batch& b) {
    if (batch.labels.empty()) batch = b;
  });

  nn::Adam opt_main(model.main_params(), 0.001);
  nn::Adam opt_adv(model.adversary_params(), 0.001);

  const uint64_t adv_before = nn::params_checksum(model.adversary_params());
  const uint64_t main_before = nn::params_checksum(model.main_params());
  main_phase_step(model, batch, false, 0.025, opt_main);
  CHECK(nn::params_checksum(model.adversary_params()) == adv_before);  // phase A isolation
  CHECK(nn::params_checksum(model.main_params()) != main_before);

  const uint64_t main_after_a = nn::params_checksum(model.main_params());
  adversary_step(model, batch, opt_adv);
  CHECK(nn::params_checksum(model.main_params()) == main_after_a);  // phase B isolation
  CHECK(nn::params_checksum(model.adversary_params()) != adv_before);
}

namespace {

double phase_a_loss_value(UaiModel& model, const Batch& batch, double alpha) {
  const auto out = model.forward(batch.images, true);
  DVec y(static_cast<Eigen::Index>(batch.labels.size()));
  DVec p(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] = batch.labels[static_cast<size_t>(i)];
    p[i] = out.binary_probs.at(static_cast<int>(i), kBinaryAttackIndex);
  }
  const auto to_dmat = [](const Tensor& t) {
    const int n = t.dim(0);
    const Eigen::Index cols = static_cast<Eigen::Index>(t.numel() / n);
    DMat m(n, cols);
    for (int i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t[i * cols + j];
    return m;
  };
  return bce(y, p) + alpha * mse(to_dmat(batch.images), to_dmat(out.x_recon)) +
         loss_adv(to_dmat(out.e1), to_dmat(out.e2), to_dmat(out.e1_recon),
                  to_dmat(out.e2_recon));
}

// Rebuilding the model from its seed replays the same weights and the same
// dropout mask sequence, which makes the train-mode loss differentiable by
// central differences.
double phase_a_loss_at(uint32_t seed, const Batch& batch, double alpha, size_t param_idx,
                       int64_t elem, float delta) {
  UaiModel model = build_uai(small_uai(), seed);
  model.params()[param_idx]->value[elem] += delta;
  return phase_a_loss_value(model, batch, alpha);
}

}  // namespace

TEST_CASE("uai phase-A gradients match finite differences") {
  BatchStream stream(fixture().full, Split::train, 32, 8, 4);
  Batch batch;
  stream.for_each_batch(0, [&](const Batch& b) {
    if (batch.labels.empty()) batch = b;
  });

  const uint32_t seed = 29;
  const double alpha = 0.05;
  UaiModel model = build_uai(small_uai(), seed);
  nn::Adam opt(model.main_params(), 1e-12);  // keeps the step negligible
  main_phase_step(model, batch, false, alpha, opt);  // leaves grads populated

  auto params = model.params();
  std::mt19937 pick(5);
  const float h = 1e-2f;
  int checked = 0;
  for (int trial = 0; trial < 60 && checked < 25; ++trial) {
    const size_t pi = pick() % params.size();
    const int64_t ei = static_cast<int64_t>(pick() % params[pi]->value.numel());
    const double g = params[pi]->grad[ei];
    const double lo = phase_a_loss_at(seed, batch, alpha, pi, ei, -h);
    const double hi = phase_a_loss_at(seed, batch, alpha, pi, ei, +h);
    const double fd = (hi - lo) / (2.0 * h);
    if (std::max(std::abs(g), std::abs(fd)) < 0.05) continue;  // below float FD noise
    CHECK(std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-3}) < 0.08);
    ++checked;
  }
  CHECK(checked >= 15);  // enough informative samples across the parameter set
}

TEST_CASE("adversary objective is non-increasing with MAIN frozen") {
  UaiModel model = build_uai(small_uai(), 11);
  BatchStream stream(fixture().full, Split::train, 32, 16, 2);
  Batch batch;
  stream.for_each_batch(0, [&](const Batch& b) {
    if (batch.labels.empty()) batch = b;
  });
  nn::Adam opt_adv(model.adversary_params(), 0.001);
  std::vector<double> objective;
  for (int i = 0; i < 10; ++i) objective.push_back(adversary_step(model, batch, opt_adv));
  for (size_t i = 1; i < objective.size(); ++i) CHECK(objective[i] <= objective[i - 1] + 1e-9);
  CHECK(objective.back() < objective.front());
}

TEST_CASE("adversarial training logs both phases and descends") {
  UaiModel model = build_uai(small_uai(), 5);
  const LossLog log = train_adversarial(model, fixture().full, quick_config(Strategy::adv_bc, 3));
  REQUIRE(log.size() == 6);  // main + adversary per epoch
  CHECK(log[0].phase == "main");
  CHECK(log[1].phase == "adversary");
  double first_main = log[0].loss, last_main = 0;
  for (const auto& e : log)
    if (e.phase == "main") last_main = e.loss;
  CHECK(last_main < first_main);

  UaiModel mt_model = build_uai(small_uai(HeadSetup::binary_plus_multiclass), 5);
  const LossLog mt_log =
      train_adversarial(mt_model, fixture().full, quick_config(Strategy::adv_mt, 3));
  double mt_first = mt_log[0].loss, mt_last = 0;
  for (const auto& e : mt_log)
    if (e.phase == "main") mt_last = e.loss;
  CHECK(mt_last < mt_first);

  CHECK_THROWS_AS(train_adversarial(model, fixture().full, quick_config(Strategy::bc)),
                  ConfigError);
}

TEST_CASE("dfs selection pass mutates no parameters") {
  PadModel model = build_classifier(toy_config(), 2);
  const auto videos = group_videos(fixture().full, Split::train);
  const uint64_t before = nn::params_checksum(model.params());
  const auto picked = dfs_select_frames(model, videos[0]);
  CHECK(picked.size() == 3);
  CHECK(nn::params_checksum(model.params()) == before);
}

TEST_CASE("dfs learning pass touches exactly 3 frames per usable video") {
  PadModel model = build_classifier(toy_config(), 2);
  size_t seen = 0;
  const LossLog log = dfs_train(model, fixture().full, quick_config(Strategy::dfs, 1),
                                [&](const Batch& b) { seen += b.labels.size(); });
  const size_t usable = group_videos(fixture().full, Split::train).size();
  CHECK(seen == 3 * usable);
  CHECK(log.size() == 1);
}

TEST_CASE("dfs skips short videos and fails with none usable") {
  const auto dir = fresh_dir("pad_dfs_short");
  const DatasetManifest two_frames =
      render_scene(dir, {{0, 0, false, 2, 99}, {0, 1, true, 2, 0}}, 32, 9);
  PadModel model = build_classifier(toy_config(), 2);
  CHECK_THROWS_AS(dfs_train(model, two_frames, quick_config(Strategy::dfs, 1)), ContractError);

  // a usable video alongside a short one: the short one is skipped, not fatal
  const auto mixed_dir = fresh_dir("pad_dfs_mixed");
  const DatasetManifest mixed = render_scene(
      mixed_dir, {{0, 0, true, 5, 0}, {0, 1, false, 5, 99}, {0, 2, true, 2, 0}}, 32, 10);
  size_t seen = 0;
  dfs_train(model, mixed, quick_config(Strategy::dfs, 1),
            [&](const Batch& b) { seen += b.labels.size(); });
  CHECK(seen == 3 * 2);  // two usable videos
  fs::remove_all(dir);
  fs::remove_all(mixed_dir);
}

TEST_CASE("dfs selection concentrates on cue-free frames once the cue is learned") {
  const auto dir = fresh_dir("pad_dfs_cue");
  std::vector<SceneVideo> videos;
  for (int v = 0; v < 6; ++v) videos.push_back({0, v, true, 10, 5});    // cue in frames 5..9
  for (int v = 0; v < 6; ++v) videos.push_back({1, v, false, 10, 99});  // genuine
  const DatasetManifest manifest = render_scene(dir, videos, 32, 21);

  PadModel model = build_classifier(toy_config(), 4);
  dfs_train(model, manifest, quick_config(Strategy::dfs, 6, 17));

  int in_cue_free = 0, total = 0;
  for (const auto& video : group_videos(manifest, Split::train)) {
    if (!video.is_attack) continue;
    for (int frame : dfs_select_frames(model, video)) {
      ++total;
      if (frame <= 4) ++in_cue_free;
    }
    // at test time the most attack-like frame is a cue frame
    CHECK(dfs_test_select(model, video) >= 5);
  }
  CHECK(total == 18);
  CHECK(in_cue_free >= 15);  // selection concentrated in the cue-free range
  fs::remove_all(dir);
}

TEST_CASE("dfs learning loss descends on the fixture") {
  PadModel model = build_classifier(toy_config(), 6);
  const LossLog log = dfs_train(model, fixture().full, quick_config(Strategy::dfs, 3));
  REQUIRE(log.size() == 3);
  CHECK(log.back().loss < log.front().loss);

  PadModel mt_model = build_classifier(toy_config(HeadSetup::binary_plus_multiclass), 6);
  const LossLog mt_log = dfs_train(mt_model, fixture().full, quick_config(Strategy::mt_dfs, 3));
  CHECK(mt_log.back().loss < mt_log.front().loss);
}

TEST_CASE("adv_dfs trains the adversarial assembly on selected frames") {
  UaiModel model = build_uai(small_uai(), 13);
  size_t seen = 0;
  const LossLog log = dfs_train(model, fixture().full, quick_config(Strategy::adv_dfs, 2),
                                [&](const Batch& b) { seen += b.labels.size(); });
  const size_t usable = group_videos(fixture().full, Split::train).size();
  CHECK(seen == 2 * 3 * usable);
  CHECK(log.size() == 4);  // main + adversary per epoch
}

TEST_CASE("score_manifest per frame and per video") {
  PadModel model = build_classifier(toy_config(), 1);
  train_classifier(model, fixture().full, quick_config(Strategy::bc, 2));

  size_t test_count = 0;
  for (const auto& r : fixture().full.records)
    if (r.split == Split::test) ++test_count;
  const auto frame_scores =
      score_manifest(model, fixture().full, Split::test, ScoringMode::per_frame);
  CHECK(frame_scores.size() == test_count);
  for (const auto& s : frame_scores) {
    CHECK(s.attack_prob >= 0.0);
    CHECK(s.attack_prob <= 1.0);
  }

  const auto video_scores =
      score_manifest(model, fixture().full, Split::test, ScoringMode::per_video_dfs);
  const auto videos = group_videos(fixture().full, Split::test);
  REQUIRE(video_scores.size() == videos.size());
  for (size_t i = 0; i < videos.size(); ++i) {
    const auto probs = model.attack_probs(load_images(videos[i].frames, 32));
    const int pick = select_test_frame(probs);
    CHECK(video_scores[i].attack_prob == probs[static_cast<size_t>(pick)]);
    CHECK(video_scores[i].id == videos[i].video_id);
  }

  DatasetManifest empty;
  empty.name = "synthetic";
  CHECK_THROWS_AS(score_manifest(model, empty, Split::test, ScoringMode::per_frame),
                  ContractError);
}

TEST_CASE("loss log csv round-trips") {
  const auto dir = fresh_dir("pad_losslog");
  const LossLog log = {{0, "train", 0.5}, {1, "main", 0.25}, {1, "adversary", 1.0 / 3.0}};
  save_loss_log_csv(log, dir / "losses.csv");
  const LossLog back = load_loss_log_csv(dir / "losses.csv");
  REQUIRE(back.size() == log.size());
  for (size_t i = 0; i < log.size(); ++i) {
    CHECK(back[i].epoch == log[i].epoch);
    CHECK(back[i].phase == log[i].phase);
    CHECK(back[i].loss == log[i].loss);
  }
  fs::remove_all(dir);
}
