#ifndef PAD_TRAINING_HPP_
#define PAD_TRAINING_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "pad/batch.hpp"
#include "pad/losses.hpp"
#include "pad/manifest.hpp"
#include "pad/metrics.hpp"
#include "pad/model.hpp"

namespace pad {

enum class Strategy { bc, mt, adv_bc, adv_mt, dfs, mt_dfs, adv_dfs };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
bool strategy_is_adversarial(Strategy s);
bool strategy_is_dfs(Strategy s);
bool strategy_uses_multiclass(Strategy s);
// Display name used in report tables (BC, MT, Adv.+BC, ...).
std::string strategy_display_name(Strategy s);

struct TrainConfig {
  Strategy strategy = Strategy::bc;
  double learning_rate = 0.001;
  std::string optimizer = "adam";
  int epochs = 20;
  int batch_size = 32;
  AlphaSchedule alpha_schedule;
  uint64_t seed = 0;
  int dfs_frames_per_video = 3;
};

void validate_train_config(const TrainConfig& config);

struct LossLogEntry {
  int epoch = 0;
  std::string phase;  // train | main | adversary
  double loss = 0.0;
};
using LossLog = std::vector<LossLogEntry>;

void save_loss_log_csv(const LossLog& log, const std::filesystem::path& path);
LossLog load_loss_log_csv(const std::filesystem::path& path);

// All frames of one video; frames ordered by frame_index and sharing the
// video-level label.
struct VideoGroup {
  std::string video_id;
  int subject_id = 0;
  bool is_attack = false;
  int attack_code = 0;
  std::vector<const SampleRecord*> frames;
};

std::vector<VideoGroup> group_videos(const DatasetManifest& manifest, Split split);

// Frame selection rules, on a per-frame attack probability vector.
// Training: the 3 hardest frames, i.e. lowest attack probability for attack
// videos, highest for genuine ones; ties broken by lower index. Returned in
// ascending index order.
std::vector<int> select_training_frames(const std::vector<double>& attack_probs, bool is_attack);
// Testing: the most attack-like frame (argmax, ties to the lowest index).
int select_test_frame(const std::vector<double>& attack_probs);

// Model-facing wrappers; returned values are the records' frame_index.
std::vector<int> dfs_select_frames(PadModel& model, const VideoGroup& video);
std::vector<int> dfs_select_frames(UaiModel& model, const VideoGroup& video);
int dfs_test_select(PadModel& model, const VideoGroup& video);
int dfs_test_select(UaiModel& model, const VideoGroup& video);

// Plain classifier training (strategies bc / mt).
LossLog train_classifier(PadModel& model, const DatasetManifest& manifest,
                         const TrainConfig& config, const BatchObserver& observer = {});

// Alternating adversarial training (strategies adv_bc / adv_mt): phase A
// steps the MAIN group on the classification + reconstruction + adversarial
// objective, phase B steps the ADVERSARY group on the disentangler
// reconstruction error.
LossLog train_adversarial(UaiModel& model, const DatasetManifest& manifest,
                          const TrainConfig& config, const BatchObserver& observer = {});

// One MAIN update (phase A) on a batch; ADVERSARY parameters are untouched.
// Returns the classification + weighted-reconstruction + adversarial loss.
double main_phase_step(UaiModel& model, const Batch& batch, bool multiclass, double alpha,
                       nn::Adam& opt_main);

// One ADVERSARY update (phase B) on a batch; MAIN parameters are untouched.
// Returns the disentangler reconstruction objective before the step.
double adversary_step(UaiModel& model, const Batch& batch, nn::Adam& opt_adv);

// Two-stage select/learn training (dfs / mt_dfs on a classifier, adv_dfs on
// the adversarial assembly). Videos with fewer than 3 frames are skipped with
// a warning.
LossLog dfs_train(PadModel& model, const DatasetManifest& manifest, const TrainConfig& config,
                  const BatchObserver& observer = {});
LossLog dfs_train(UaiModel& model, const DatasetManifest& manifest, const TrainConfig& config,
                  const BatchObserver& observer = {});

enum class ScoringMode { per_frame, per_video_dfs };
std::string to_string(ScoringMode m);
ScoringMode scoring_mode_from_string(const std::string& s);

std::vector<ScoreRecord> score_manifest(PadModel& model, const DatasetManifest& manifest,
                                        Split split, ScoringMode mode);
std::vector<ScoreRecord> score_manifest(UaiModel& model, const DatasetManifest& manifest,
                                        Split split, ScoringMode mode);

}  // namespace pad

#endif  // PAD_TRAINING_HPP_
