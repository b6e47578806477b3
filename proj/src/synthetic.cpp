#include "pad/synthetic.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <random>

#include "pad/tensor.hpp"

namespace pad {

namespace {

int scaled(double f, int size) { return static_cast<int>(std::lround(f * size)); }

// Blends color into img where mask is set: p <- round((1-s)*p + s*color).
// Untouched pixels keep their exact bytes so pixel-diff oracles stay clean.
void blend_region(cv::Mat& img, const cv::Mat& mask, cv::Vec3b color, double strength) {
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) {
      if (!mask.at<uint8_t>(y, x)) continue;
      cv::Vec3b& p = img.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c)
        p[c] = cv::saturate_cast<uint8_t>(
            std::lround((1.0 - strength) * p[c] + strength * color[c]));
    }
}

struct CueShape {
  enum Kind { rect, circle } kind = rect;
  cv::Rect box;        // rect extent, or the circle bounding box
  cv::Vec3b color;
};

std::vector<CueShape> background_cue_shapes(int code, int size) {
  const auto r = [&](double x0, double y0, double x1, double y1) {
    return cv::Rect(scaled(x0, size), scaled(y0, size), scaled(x1 - x0, size),
                    scaled(y1 - y0, size));
  };
  const auto c = [&](double cx, double cy, double rad) {
    const int cr = scaled(rad, size);
    return cv::Rect(scaled(cx, size) - cr, scaled(cy, size) - cr, 2 * cr + 1, 2 * cr + 1);
  };
  switch (code) {
    case 1:  // pin holding the printed sheet
      return {{CueShape::circle, c(0.50, 0.11, 0.035), {180, 185, 205}}};
    case 2:  // two pins
      return {{CueShape::circle, c(0.38, 0.11, 0.030), {180, 185, 205}},
              {CueShape::circle, c(0.62, 0.11, 0.030), {180, 185, 205}}};
    case 3:  // screen bezel bar along the top edge
      return {{CueShape::rect, r(0.08, 0.03, 0.92, 0.17), {38, 36, 40}}};
    case 4:  // bright screen reflection in the corner
      return {{CueShape::circle, c(0.875, 0.875, 0.075), {235, 240, 245}}};
    case 5:  // paper sheet edge, left
      return {{CueShape::rect, r(0.04, 0.30, 0.14, 0.70), {232, 235, 238}}};
    case 6:  // paper sheet edge, right
      return {{CueShape::rect, r(0.86, 0.30, 0.96, 0.70), {232, 235, 238}}};
    case 7:  // paper sheet edge, bottom
      return {{CueShape::rect, r(0.20, 0.84, 0.80, 0.95), {232, 235, 238}}};
    default:
      throw ContractError("no background cue for attack code " + std::to_string(code));
  }
}

void paint_shape(cv::Mat& mask, const CueShape& s) {
  if (s.kind == CueShape::rect) {
    cv::rectangle(mask, s.box, cv::Scalar(255), cv::FILLED);
  } else {
    const cv::Point center(s.box.x + s.box.width / 2, s.box.y + s.box.height / 2);
    cv::circle(mask, center, s.box.width / 2, cv::Scalar(255), cv::FILLED, cv::LINE_8);
  }
}

// In-face artifact inside this region (strictly inside the crop box).
cv::Rect face_texture_box(int size) {
  return cv::Rect(scaled(0.33, size), scaled(0.33, size), scaled(0.34, size),
                  scaled(0.34, size));
}

void draw_in_face_artifact(cv::Mat& img, int code, double strength) {
  const cv::Rect box = face_texture_box(img.cols);
  cv::Mat mask = cv::Mat::zeros(img.size(), CV_8U);
  if (is_print_attack(code)) {
    for (int y = box.y; y < box.y + box.height; y += 3)
      cv::line(mask, {box.x, y}, {box.x + box.width - 1, y}, cv::Scalar(255), 1, cv::LINE_8);
    blend_region(img, mask, {90, 95, 120}, strength * 0.6);
  } else if (is_replay_attack(code)) {
    for (int y = box.y; y < box.y + box.height; ++y)
      for (int x = box.x; x < box.x + box.width; ++x)
        if ((x + y) % 4 == 0) mask.at<uint8_t>(y, x) = 255;
    blend_region(img, mask, {220, 225, 235}, strength * 0.6);
  } else if (is_mask_attack(code)) {
    const int off = (code - 5) * box.height / 4;
    cv::line(mask, {box.x, box.y + off}, {box.x + box.width - 1, box.y + off}, cv::Scalar(255), 2,
             cv::LINE_8);
    cv::line(mask, {box.x + box.width / 2, box.y}, {box.x + box.width / 2, box.y + box.height - 1},
             cv::Scalar(255), 2, cv::LINE_8);
    blend_region(img, mask, {240, 240, 240}, strength * 0.8);
  } else {
    throw ContractError("no in-face artifact for attack code " + std::to_string(code));
  }
}

}  // namespace

void validate_synthetic_config(const SyntheticConfig& config) {
  if (config.frames_per_video < 3)
    throw ConfigError("synthetic config: frames_per_video must be >= 3");
  if (config.n_subjects < 1 || config.videos_per_subject < 1)
    throw ConfigError("synthetic config: needs at least one subject and one video");
  if (config.image_size < 16 || config.image_size % 4 != 0)
    throw ConfigError("synthetic config: image_size must be >= 16 and divisible by 4");
  if (config.cue_strength < 0.0 || config.cue_strength > 1.0)
    throw ConfigError("synthetic config: cue_strength must be in [0,1]");
  for (int c : config.attack_codes)
    if (c < 1 || c >= kNumAttackClasses)
      throw ConfigError("synthetic config: invalid attack code " + std::to_string(c));
  for (int c : config.background_cue_classes)
    if (c < 1 || c >= kNumAttackClasses)
      throw ConfigError("synthetic config: invalid background cue code " + std::to_string(c));
}

cv::Rect synthetic_crop_box(int image_size) {
  const int q = image_size / 4;
  return cv::Rect(q, q, image_size / 2, image_size / 2);
}

cv::Rect synthetic_cue_box(int attack_code, int image_size) {
  const auto shapes = background_cue_shapes(attack_code, image_size);
  cv::Rect box = shapes.front().box;
  for (size_t i = 1; i < shapes.size(); ++i) box |= shapes[i].box;
  return box;
}

int synthetic_train_subjects(int n_subjects) {
  return std::max(1, 2 * n_subjects / 3);
}

cv::Mat render_synthetic_frame(const FrameRenderSpec& spec) {
  const int size = spec.image_size;
  std::mt19937 subject_rng(static_cast<uint32_t>(
      mix_seed(spec.seed, 0x50B7EC70ULL + static_cast<uint64_t>(spec.subject_id))));
  std::mt19937 frame_rng(static_cast<uint32_t>(mix_seed(
      mix_seed(spec.seed, static_cast<uint64_t>(spec.subject_id) * 1000003ULL +
                              static_cast<uint64_t>(spec.video_index)),
      static_cast<uint64_t>(spec.frame_index))));

  std::uniform_int_distribution<int> u8(0, 255);
  // subject-level appearance
  const int bg_base = 120 + subject_rng() % 60;
  const cv::Vec3b skin(static_cast<uint8_t>(120 + subject_rng() % 50),
                       static_cast<uint8_t>(150 + subject_rng() % 50),
                       static_cast<uint8_t>(185 + subject_rng() % 50));
  const double face_rx = 0.13 + 0.03 * (subject_rng() % 100) / 100.0;
  const double face_ry = 0.17 + 0.03 * (subject_rng() % 100) / 100.0;

  // frame-level jitter
  std::uniform_int_distribution<int> jitter(-scaled(0.015, size), scaled(0.015, size));
  std::uniform_int_distribution<int> bright(-6, 6);
  const int dx = jitter(frame_rng), dy = jitter(frame_rng);
  const int db = bright(frame_rng);

  cv::Mat img(size, size, CV_8UC3);
  for (int y = 0; y < size; ++y) {
    const int row = bg_base + db + (y * 20) / size - 10;
    for (int x = 0; x < size; ++x) {
      const int noise = static_cast<int>(frame_rng() % 7) - 3;
      const uint8_t v = cv::saturate_cast<uint8_t>(row + noise);
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(v, cv::saturate_cast<uint8_t>(v + 6),
                                          cv::saturate_cast<uint8_t>(v + 2));
    }
  }

  const cv::Point center(size / 2 + dx, size / 2 + dy);
  cv::ellipse(img, center, cv::Size(scaled(face_rx, size), scaled(face_ry, size)), 0, 0, 360,
              cv::Scalar(skin[0], skin[1], skin[2]), cv::FILLED, cv::LINE_8);
  const int eye_dx = scaled(0.06, size), eye_dy = scaled(0.06, size);
  const int eye_r = std::max(1, scaled(0.018, size));
  cv::circle(img, center + cv::Point(-eye_dx, -eye_dy), eye_r, cv::Scalar(40, 40, 50), cv::FILLED,
             cv::LINE_8);
  cv::circle(img, center + cv::Point(eye_dx, -eye_dy), eye_r, cv::Scalar(40, 40, 50), cv::FILLED,
             cv::LINE_8);
  cv::line(img, center + cv::Point(-eye_dx / 2, eye_dy), center + cv::Point(eye_dx / 2, eye_dy),
           cv::Scalar(60, 50, 90), std::max(1, size / 64), cv::LINE_8);

  if (spec.attack_code != 0 && spec.draw_artifact) {
    if (spec.background_cue) {
      for (const auto& shape : background_cue_shapes(spec.attack_code, size)) {
        cv::Mat shape_mask = cv::Mat::zeros(img.size(), CV_8U);
        paint_shape(shape_mask, shape);
        blend_region(img, shape_mask, shape.color, spec.cue_strength);
      }
    } else {
      draw_in_face_artifact(img, spec.attack_code, spec.cue_strength);
    }
  }
  return img;
}

std::pair<DatasetManifest, DatasetManifest> generate_synthetic(
    const SyntheticConfig& config, const std::filesystem::path& out_dir) {
  validate_synthetic_config(config);

  std::vector<int> code_cycle;
  code_cycle.push_back(0);
  for (int c : config.attack_codes) code_cycle.push_back(c);

  const int n_train = synthetic_train_subjects(config.n_subjects);
  DatasetManifest full, crop;
  full.name = crop.name = "synthetic";

  const cv::Rect box = synthetic_crop_box(config.image_size);
  for (int s = 0; s < config.n_subjects; ++s) {
    const Split split = s < n_train ? Split::train : Split::test;
    for (int v = 0; v < config.videos_per_subject; ++v) {
      const int code = code_cycle[static_cast<size_t>(v) % code_cycle.size()];
      char video_id[32];
      std::snprintf(video_id, sizeof(video_id), "s%02d_v%02d", s, v);
      for (int f = 0; f < config.frames_per_video; ++f) {
        FrameRenderSpec spec;
        spec.image_size = config.image_size;
        spec.subject_id = s;
        spec.video_index = v;
        spec.frame_index = f;
        spec.attack_code = code;
        spec.background_cue = config.background_cue_classes.count(code) > 0;
        spec.cue_strength = config.cue_strength;
        spec.seed = config.seed;
        const cv::Mat full_img = render_synthetic_frame(spec);
        const cv::Mat crop_img = full_img(box).clone();

        for (Variant variant : {Variant::full, Variant::crop}) {
          const auto dir = out_dir / to_string(variant) / std::to_string(s) / video_id;
          std::filesystem::create_directories(dir);
          const auto path = dir / (std::to_string(f) + ".png");
          if (!cv::imwrite(path.string(), variant == Variant::full ? full_img : crop_img))
            throw IngestionError("failed to write " + path.string());
          SampleRecord r;
          r.image_ref = path.string();
          r.subject_id = s;
          r.video_id = video_id;
          r.frame_index = f;
          r.attack_code = code;
          r.is_attack = code != 0;
          r.variant = variant;
          r.split = split;
          (variant == Variant::full ? full : crop).records.push_back(std::move(r));
        }
      }
    }
  }
  rebuild_codes_present(&full);
  rebuild_codes_present(&crop);
  save_manifest_csv(full, out_dir / "manifest_full.csv");
  save_manifest_csv(crop, out_dir / "manifest_crop.csv");
  return {std::move(full), std::move(crop)};
}

}  // namespace pad
