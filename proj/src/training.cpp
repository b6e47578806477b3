#include "pad/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace pad {

namespace {

DVec labels_to_dvec(const std::vector<int>& labels) {
  DVec v(static_cast<Eigen::Index>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) v[static_cast<Eigen::Index>(i)] = labels[i];
  return v;
}

DVec attack_col(const Tensor& probs) {
  DVec v(probs.dim(0));
  for (int i = 0; i < probs.dim(0); ++i) v[i] = probs.at(i, kBinaryAttackIndex);
  return v;
}

DMat tensor_to_dmat(const Tensor& t) {
  const int n = t.dim(0);
  const Eigen::Index cols = static_cast<Eigen::Index>(t.numel() / n);
  DMat m(n, cols);
  for (int i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t[i * cols + j];
  return m;
}

DMat onehot_dmat(const std::vector<int>& labels, int classes) {
  DMat m = DMat::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (size_t i = 0; i < labels.size(); ++i) m(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return m;
}

// d(softmax cross-entropy)/d logits = (p - onehot) / batch
Tensor softmax_ce_grad(const Tensor& probs, const std::vector<int>& labels) {
  Tensor g = probs;
  const float inv_n = 1.0f / static_cast<float>(probs.dim(0));
  for (int i = 0; i < probs.dim(0); ++i) {
    g.at(i, labels[static_cast<size_t>(i)]) -= 1.0f;
    for (int j = 0; j < probs.dim(1); ++j) g.at(i, j) *= inv_n;
  }
  return g;
}

// scale * (a - b)
Tensor scaled_diff(const Tensor& a, const Tensor& b, float scale) {
  if (!a.same_shape(b)) throw ContractError("scaled_diff: shape mismatch");
  Tensor out = a;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = scale * (a[i] - b[i]);
  return out;
}

void require_multiclass(bool has_head, Strategy strategy) {
  if (!has_head)
    throw ConfigError("strategy " + to_string(strategy) + " requires a multiclass head");
}

double classifier_batch_loss(const PadModel::Output& out, const Batch& batch, bool multiclass) {
  double loss = bce(labels_to_dvec(batch.labels), attack_col(out.binary_probs));
  if (multiclass)
    loss += ce(onehot_dmat(batch.attack_codes, out.mc_probs->dim(1)), tensor_to_dmat(*out.mc_probs));
  return loss;
}

// One optimizer step on a plain classifier; returns the batch loss.
double classifier_step(PadModel& model, const Batch& batch, bool multiclass, nn::Adam& opt) {
  const PadModel::Output out = model.forward(batch.images, true);
  const double loss = classifier_batch_loss(out, batch, multiclass);
  opt.zero_grad();
  Tensor g_feat = model.binary_head().backward(softmax_ce_grad(out.binary_probs, batch.labels));
  if (multiclass)
    g_feat += model.multiclass_head()->backward(softmax_ce_grad(*out.mc_probs, batch.attack_codes));
  model.trunk().backward(g_feat);
  opt.step();
  return loss;
}

struct AdvStepResult {
  double main_loss = 0.0;       // class + alpha * recon + adversarial term
  double adversary_loss = 0.0;  // disentangler reconstruction error
};

// Phase A (MAIN step) followed by phase B (ADVERSARY step) on one batch.
AdvStepResult adversarial_step(UaiModel& model, const Batch& batch, bool multiclass, double alpha,
                               nn::Adam& opt_main, nn::Adam& opt_adv) {
  AdvStepResult result;
  result.main_loss = main_phase_step(model, batch, multiclass, alpha, opt_main);
  result.adversary_loss = adversary_step(model, batch, opt_adv);
  return result;
}

struct EpochAccumulator {
  double sum = 0.0;
  size_t count = 0;
  void add(double loss, size_t n) {
    sum += loss * static_cast<double>(n);
    count += n;
  }
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

int model_input_size(PadModel& model) { return model.config().input_size; }
int model_input_size(UaiModel& model) { return model.config().base.input_size; }

template <typename Model>
std::vector<double> video_attack_probs(Model& model, const VideoGroup& video) {
  return model.attack_probs(load_images(video.frames, model_input_size(model)));
}

template <typename Model>
std::vector<ScoreRecord> score_impl(Model& model, const DatasetManifest& manifest, Split split,
                                    ScoringMode mode) {
  std::vector<ScoreRecord> scores;
  if (mode == ScoringMode::per_frame) {
    BatchStream stream(manifest, split, model_input_size(model), 64, 0, /*shuffle=*/false);
    if (stream.size() == 0) throw ContractError("score_manifest: empty split");
    stream.for_each_batch(0, [&](const Batch& batch) {
      const std::vector<double> probs = model.attack_probs(batch.images);
      for (size_t i = 0; i < batch.records.size(); ++i) {
        const SampleRecord* r = batch.records[i];
        scores.push_back({r->image_ref, probs[i], r->is_attack, r->attack_code, r->subject_id});
      }
    });
    return scores;
  }
  const auto videos = group_videos(manifest, split);
  if (videos.empty()) throw ContractError("score_manifest: empty split");
  for (const auto& video : videos) {
    const std::vector<double> probs = video_attack_probs(model, video);
    const int pick = select_test_frame(probs);
    scores.push_back({video.video_id, probs[static_cast<size_t>(pick)], video.is_attack,
                      video.attack_code, video.subject_id});
  }
  return scores;
}

struct DfsSetup {
  std::vector<VideoGroup> videos;
  std::map<const SampleRecord*, size_t> record_index;
};

DfsSetup dfs_setup(const DatasetManifest& manifest, const BatchStream& stream) {
  DfsSetup setup;
  for (auto video : group_videos(manifest, Split::train)) {
    if (static_cast<int>(video.frames.size()) < 3) {
      std::cerr << "[padlab] warning: skipping video " << video.video_id
                << " with fewer than 3 frames\n";
      continue;
    }
    setup.videos.push_back(std::move(video));
  }
  if (setup.videos.empty()) throw ContractError("dfs_train: no usable videos (need >= 3 frames)");
  for (size_t i = 0; i < stream.records().size(); ++i) setup.record_index[stream.records()[i]] = i;
  return setup;
}

// Selection pass: evaluate every frame, pick 3 per video. Read-only.
std::vector<size_t> dfs_selection_pass(const DfsSetup& setup, const BatchStream& stream,
                                       const std::function<std::vector<double>(const Tensor&)>& probs_fn) {
  std::vector<size_t> selected;
  for (const auto& video : setup.videos) {
    std::vector<size_t> frame_indices;
    for (const auto* r : video.frames) frame_indices.push_back(setup.record_index.at(r));
    const Batch frames = stream.gather(frame_indices);
    const std::vector<double> probs = probs_fn(frames.images);
    for (int pick : select_training_frames(probs, video.is_attack))
      selected.push_back(frame_indices[static_cast<size_t>(pick)]);
  }
  return selected;
}

std::vector<std::vector<size_t>> shuffled_batches(std::vector<size_t> indices, int batch_size,
                                                  uint64_t seed, int epoch) {
  std::mt19937_64 rng(mix_seed(seed, 0xDF5000ULL + static_cast<uint64_t>(epoch)));
  std::shuffle(indices.begin(), indices.end(), rng);
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < indices.size(); start += static_cast<size_t>(batch_size))
    batches.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(start),
                         indices.begin() + static_cast<std::ptrdiff_t>(std::min(
                                               indices.size(), start + static_cast<size_t>(batch_size))));
  return batches;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::bc: return "bc";
    case Strategy::mt: return "mt";
    case Strategy::adv_bc: return "adv_bc";
    case Strategy::adv_mt: return "adv_mt";
    case Strategy::dfs: return "dfs";
    case Strategy::mt_dfs: return "mt_dfs";
    case Strategy::adv_dfs: return "adv_dfs";
  }
  throw ContractError("bad strategy value");
}

Strategy strategy_from_string(const std::string& s) {
  for (Strategy st : {Strategy::bc, Strategy::mt, Strategy::adv_bc, Strategy::adv_mt,
                      Strategy::dfs, Strategy::mt_dfs, Strategy::adv_dfs})
    if (to_string(st) == s) return st;
  throw ConfigError("unknown strategy: " + s);
}

bool strategy_is_adversarial(Strategy s) {
  return s == Strategy::adv_bc || s == Strategy::adv_mt || s == Strategy::adv_dfs;
}

bool strategy_is_dfs(Strategy s) {
  return s == Strategy::dfs || s == Strategy::mt_dfs || s == Strategy::adv_dfs;
}

bool strategy_uses_multiclass(Strategy s) {
  return s == Strategy::mt || s == Strategy::adv_mt || s == Strategy::mt_dfs;
}

std::string strategy_display_name(Strategy s) {
  switch (s) {
    case Strategy::bc: return "BC";
    case Strategy::mt: return "MT";
    case Strategy::adv_bc: return "Adv.+BC";
    case Strategy::adv_mt: return "Adv.+MT";
    case Strategy::dfs: return "DFS";
    case Strategy::mt_dfs: return "MT+DFS";
    case Strategy::adv_dfs: return "Adv.+DFS";
  }
  throw ContractError("bad strategy value");
}

void validate_train_config(const TrainConfig& config) {
  if (config.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (config.optimizer != "adam") throw ConfigError("unknown optimizer: " + config.optimizer);
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.dfs_frames_per_video != 3)
    throw ConfigError("dfs_frames_per_video is fixed at 3");
}

void save_loss_log_csv(const LossLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write loss log: " + path.string());
  out << "epoch,phase,loss\n";
  char buf[32];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.loss);
    out << e.epoch << ',' << e.phase << ',' << buf << '\n';
  }
}

LossLog load_loss_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read loss log: " + path.string());
  std::string line;
  std::getline(in, line);
  LossLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string epoch, phase, loss;
    std::getline(ss, epoch, ',');
    std::getline(ss, phase, ',');
    std::getline(ss, loss, ',');
    log.push_back({std::stoi(epoch), phase, std::stod(loss)});
  }
  return log;
}

std::vector<VideoGroup> group_videos(const DatasetManifest& manifest, Split split) {
  std::vector<VideoGroup> videos;
  std::map<std::string, size_t> index;
  for (const auto& r : manifest.records) {
    if (r.split != split) continue;
    auto it = index.find(r.video_id);
    if (it == index.end()) {
      index[r.video_id] = videos.size();
      videos.push_back({r.video_id, r.subject_id, r.is_attack, r.attack_code, {&r}});
      continue;
    }
    VideoGroup& group = videos[it->second];
    if (group.is_attack != r.is_attack || group.attack_code != r.attack_code)
      throw ContractError("video " + r.video_id + " mixes labels across frames");
    group.frames.push_back(&r);
  }
  for (auto& group : videos)
    std::sort(group.frames.begin(), group.frames.end(),
              [](const SampleRecord* a, const SampleRecord* b) {
                return a->frame_index < b->frame_index;
              });
  return videos;
}

std::vector<int> select_training_frames(const std::vector<double>& attack_probs, bool is_attack) {
  const int n = static_cast<int>(attack_probs.size());
  if (n < 3) throw ContractError("select_training_frames: needs >= 3 frames");
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double pa = attack_probs[static_cast<size_t>(a)];
    const double pb = attack_probs[static_cast<size_t>(b)];
    if (pa != pb) return is_attack ? pa < pb : pa > pb;
    return a < b;
  });
  std::vector<int> picked(order.begin(), order.begin() + 3);
  std::sort(picked.begin(), picked.end());
  return picked;
}

int select_test_frame(const std::vector<double>& attack_probs) {
  if (attack_probs.empty()) throw ContractError("select_test_frame: empty video");
  int best = 0;
  for (int i = 1; i < static_cast<int>(attack_probs.size()); ++i)
    if (attack_probs[static_cast<size_t>(i)] > attack_probs[static_cast<size_t>(best)]) best = i;
  return best;
}

namespace {

template <typename Model>
std::vector<int> dfs_select_impl(Model& model, const VideoGroup& video) {
  if (static_cast<int>(video.frames.size()) < 3)
    throw ContractError("dfs_select_frames: video " + video.video_id + " has fewer than 3 frames");
  const std::vector<double> probs = video_attack_probs(model, video);
  std::vector<int> out;
  for (int pick : select_training_frames(probs, video.is_attack))
    out.push_back(video.frames[static_cast<size_t>(pick)]->frame_index);
  return out;
}

template <typename Model>
int dfs_test_select_impl(Model& model, const VideoGroup& video) {
  if (video.frames.empty()) throw ContractError("dfs_test_select: empty video");
  const std::vector<double> probs = video_attack_probs(model, video);
  return video.frames[static_cast<size_t>(select_test_frame(probs))]->frame_index;
}

}  // namespace

std::vector<int> dfs_select_frames(PadModel& model, const VideoGroup& video) {
  return dfs_select_impl(model, video);
}
std::vector<int> dfs_select_frames(UaiModel& model, const VideoGroup& video) {
  return dfs_select_impl(model, video);
}
int dfs_test_select(PadModel& model, const VideoGroup& video) {
  return dfs_test_select_impl(model, video);
}
int dfs_test_select(UaiModel& model, const VideoGroup& video) {
  return dfs_test_select_impl(model, video);
}

LossLog train_classifier(PadModel& model, const DatasetManifest& manifest,
                         const TrainConfig& config, const BatchObserver& observer) {
  validate_train_config(config);
  if (config.strategy != Strategy::bc && config.strategy != Strategy::mt)
    throw ConfigError("train_classifier handles strategies bc and mt only");
  const bool multiclass = config.strategy == Strategy::mt;
  if (multiclass) require_multiclass(model.multiclass_head() != nullptr, config.strategy);

  BatchStream stream(manifest, Split::train, model.config().input_size, config.batch_size,
                     config.seed);
  nn::Adam opt(model.params(), config.learning_rate);
  LossLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochAccumulator acc;
    stream.for_each_batch(epoch, [&](const Batch& batch) {
      if (observer) observer(batch);
      acc.add(classifier_step(model, batch, multiclass, opt), batch.labels.size());
    });
    log.push_back({epoch, "train", acc.mean()});
  }
  return log;
}

LossLog train_adversarial(UaiModel& model, const DatasetManifest& manifest,
                          const TrainConfig& config, const BatchObserver& observer) {
  validate_train_config(config);
  if (config.strategy != Strategy::adv_bc && config.strategy != Strategy::adv_mt)
    throw ConfigError("train_adversarial handles strategies adv_bc and adv_mt only");
  const bool multiclass = config.strategy == Strategy::adv_mt;
  if (multiclass) require_multiclass(model.multiclass_head() != nullptr, config.strategy);

  BatchStream stream(manifest, Split::train, model.config().base.input_size, config.batch_size,
                     config.seed);
  nn::Adam opt_main(model.main_params(), config.learning_rate);
  nn::Adam opt_adv(model.adversary_params(), config.learning_rate);
  LossLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double alpha = alpha_at(config.alpha_schedule, epoch);
    EpochAccumulator acc_main, acc_adv;
    stream.for_each_batch(epoch, [&](const Batch& batch) {
      if (observer) observer(batch);
      const AdvStepResult r = adversarial_step(model, batch, multiclass, alpha, opt_main, opt_adv);
      acc_main.add(r.main_loss, batch.labels.size());
      acc_adv.add(r.adversary_loss, batch.labels.size());
    });
    log.push_back({epoch, "main", acc_main.mean()});
    log.push_back({epoch, "adversary", acc_adv.mean()});
  }
  return log;
}

LossLog dfs_train(PadModel& model, const DatasetManifest& manifest, const TrainConfig& config,
                  const BatchObserver& observer) {
  validate_train_config(config);
  if (config.strategy != Strategy::dfs && config.strategy != Strategy::mt_dfs)
    throw ConfigError("dfs_train(classifier) handles strategies dfs and mt_dfs only");
  const bool multiclass = config.strategy == Strategy::mt_dfs;
  if (multiclass) require_multiclass(model.multiclass_head() != nullptr, config.strategy);

  BatchStream stream(manifest, Split::train, model.config().input_size, config.batch_size,
                     config.seed, /*shuffle=*/false);
  const DfsSetup setup = dfs_setup(manifest, stream);
  nn::Adam opt(model.params(), config.learning_rate);
  LossLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<size_t> selected = dfs_selection_pass(
        setup, stream, [&](const Tensor& images) { return model.attack_probs(images); });
    EpochAccumulator acc;
    for (const auto& indices : shuffled_batches(selected, config.batch_size, config.seed, epoch)) {
      const Batch batch = stream.gather(indices);
      if (observer) observer(batch);
      acc.add(classifier_step(model, batch, multiclass, opt), batch.labels.size());
    }
    log.push_back({epoch, "train", acc.mean()});
  }
  return log;
}

LossLog dfs_train(UaiModel& model, const DatasetManifest& manifest, const TrainConfig& config,
                  const BatchObserver& observer) {
  validate_train_config(config);
  if (config.strategy != Strategy::adv_dfs)
    throw ConfigError("dfs_train(uai) handles strategy adv_dfs only");

  BatchStream stream(manifest, Split::train, model.config().base.input_size, config.batch_size,
                     config.seed, /*shuffle=*/false);
  const DfsSetup setup = dfs_setup(manifest, stream);
  nn::Adam opt_main(model.main_params(), config.learning_rate);
  nn::Adam opt_adv(model.adversary_params(), config.learning_rate);
  LossLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double alpha = alpha_at(config.alpha_schedule, epoch);
    const std::vector<size_t> selected = dfs_selection_pass(
        setup, stream, [&](const Tensor& images) { return model.attack_probs(images); });
    EpochAccumulator acc_main, acc_adv;
    for (const auto& indices : shuffled_batches(selected, config.batch_size, config.seed, epoch)) {
      const Batch batch = stream.gather(indices);
      if (observer) observer(batch);
      const AdvStepResult r =
          adversarial_step(model, batch, /*multiclass=*/false, alpha, opt_main, opt_adv);
      acc_main.add(r.main_loss, batch.labels.size());
      acc_adv.add(r.adversary_loss, batch.labels.size());
    }
    log.push_back({epoch, "main", acc_main.mean()});
    log.push_back({epoch, "adversary", acc_adv.mean()});
  }
  return log;
}

double main_phase_step(UaiModel& model, const Batch& batch, bool multiclass, double alpha,
                       nn::Adam& opt_main) {
  const float inv_n = 1.0f / static_cast<float>(batch.images.dim(0));
  nn::zero_grads(model.params());
  UaiModel::Output out = model.forward(batch.images, true);

  double loss = bce(labels_to_dvec(batch.labels), attack_col(out.binary_probs));
  if (multiclass)
    loss +=
        ce(onehot_dmat(batch.attack_codes, out.mc_probs->dim(1)), tensor_to_dmat(*out.mc_probs));
  loss += alpha * mse(tensor_to_dmat(batch.images), tensor_to_dmat(out.x_recon));
  loss += loss_adv(tensor_to_dmat(out.e1), tensor_to_dmat(out.e2), tensor_to_dmat(out.e1_recon),
                   tensor_to_dmat(out.e2_recon));

  Tensor g_e1 = model.binary_head().backward(softmax_ce_grad(out.binary_probs, batch.labels));
  if (multiclass)
    g_e1 += model.multiclass_head()->backward(softmax_ce_grad(*out.mc_probs, batch.attack_codes));

  // reconstruction path: alpha * mse(x, x'), summed over features, mean over batch
  const Tensor g_xrecon =
      scaled_diff(out.x_recon, batch.images, 2.0f * static_cast<float>(alpha) * inv_n);
  const Tensor g_dec_in = model.decoder().backward(g_xrecon);
  Tensor g_noisy_e1, g_e2;
  nn::split_cols(g_dec_in, model.config().dim_e1, &g_noisy_e1, &g_e2);
  g_e1 += model.dropout().backward(g_noisy_e1);

  // adversarial loss: -mse(e1, e1') - mse(e2, e2')
  g_e1 += scaled_diff(out.e1_recon, out.e1, 2.0f * inv_n);  // = -2/n (e1 - e1')
  g_e2 += scaled_diff(out.e2_recon, out.e2, 2.0f * inv_n);
  g_e1 += model.disentangler_f2().backward(scaled_diff(out.e2, out.e2_recon, 2.0f * inv_n));
  g_e2 += model.disentangler_f1().backward(scaled_diff(out.e1, out.e1_recon, 2.0f * inv_n));

  Tensor g_feat = model.proj_e1().backward(g_e1);
  g_feat += model.proj_e2().backward(g_e2);
  model.trunk().backward(g_feat);
  opt_main.step();
  return loss;
}

double adversary_step(UaiModel& model, const Batch& batch, nn::Adam& opt_adv) {
  const float inv_n = 1.0f / static_cast<float>(batch.images.dim(0));
  nn::zero_grads(model.params());
  const UaiModel::Embeddings emb = model.embed(batch.images, true);
  const Tensor e1_recon = model.disentangler_f1().forward(emb.e2, true);
  const Tensor e2_recon = model.disentangler_f2().forward(emb.e1, true);
  const double objective = mse(tensor_to_dmat(emb.e1), tensor_to_dmat(e1_recon)) +
                           mse(tensor_to_dmat(emb.e2), tensor_to_dmat(e2_recon));
  model.disentangler_f1().backward(scaled_diff(e1_recon, emb.e1, 2.0f * inv_n));
  model.disentangler_f2().backward(scaled_diff(e2_recon, emb.e2, 2.0f * inv_n));
  opt_adv.step();
  return objective;
}

std::string to_string(ScoringMode m) {
  return m == ScoringMode::per_frame ? "per_frame" : "per_video_dfs";
}

ScoringMode scoring_mode_from_string(const std::string& s) {
  if (s == "per_frame") return ScoringMode::per_frame;
  if (s == "per_video_dfs") return ScoringMode::per_video_dfs;
  throw ConfigError("unknown scoring mode: " + s);
}

std::vector<ScoreRecord> score_manifest(PadModel& model, const DatasetManifest& manifest,
                                        Split split, ScoringMode mode) {
  return score_impl(model, manifest, split, mode);
}

std::vector<ScoreRecord> score_manifest(UaiModel& model, const DatasetManifest& manifest,
                                        Split split, ScoringMode mode) {
  return score_impl(model, manifest, split, mode);
}

}  // namespace pad
