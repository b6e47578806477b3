#ifndef PAD_SYNTHETIC_HPP_
#define PAD_SYNTHETIC_HPP_

#include <opencv2/core.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <utility>

#include "pad/manifest.hpp"

namespace pad {

// Desk-scale stand-in for the licensed PAD datasets. Every video gets a fixed
// attack code; attacks in background_cue_classes carry their artifact only
// outside the face crop, all other attacks carry an in-face texture artifact,
// genuine frames carry neither.
struct SyntheticConfig {
  int n_subjects = 6;
  int videos_per_subject = 10;
  int frames_per_video = 5;
  int image_size = 64;
  double cue_strength = 0.8;
  std::set<int> background_cue_classes = {3, 4};
  std::set<int> attack_codes = {1, 2, 3, 4, 5, 6, 7};  // which attacks to render
  uint64_t seed = 0;
};

void validate_synthetic_config(const SyntheticConfig& config);

// Central face region; the crop variant is exactly this sub-image.
cv::Rect synthetic_crop_box(int image_size);

// Pixel extent of the background artifact for an attack code.
cv::Rect synthetic_cue_box(int attack_code, int image_size);

// Subjects [0, n_train) are the train split.
int synthetic_train_subjects(int n_subjects);

// Low-level renderer, also used to build bespoke scenarios in tests: the face
// and background depend only on (seed, subject, video, frame), never on the
// attack code, so a frame rendered with draw_artifact=false is the exact
// genuine twin of its attack rendering.
struct FrameRenderSpec {
  int image_size = 64;
  int subject_id = 0;
  int video_index = 0;
  int frame_index = 0;
  int attack_code = 0;
  bool background_cue = true;
  bool draw_artifact = true;
  double cue_strength = 0.8;
  uint64_t seed = 0;
};

cv::Mat render_synthetic_frame(const FrameRenderSpec& spec);

// Writes PNGs under <out_dir>/<variant>/<subject>/<video>/<frame>.png and the
// two manifest CSVs; returns the (full, crop) manifests, index-aligned.
std::pair<DatasetManifest, DatasetManifest> generate_synthetic(
    const SyntheticConfig& config, const std::filesystem::path& out_dir);

}  // namespace pad

#endif  // PAD_SYNTHETIC_HPP_
