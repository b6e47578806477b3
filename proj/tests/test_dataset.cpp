#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include <filesystem>
#include <fstream>

#include "pad/batch.hpp"
#include "pad/manifest.hpp"
#include "pad/synthetic.hpp"
#include "pad/video.hpp"

using namespace pad;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SampleRecord record(int subject, const std::string& video, int frame, int code, Split split,
                    Variant variant = Variant::full) {
  SampleRecord r;
  r.image_ref = "img/" + video + "_" + std::to_string(frame) + ".png";
  r.subject_id = subject;
  r.video_id = video;
  r.frame_index = frame;
  r.attack_code = code;
  r.is_attack = code != 0;
  r.variant = variant;
  r.split = split;
  return r;
}

DatasetManifest small_manifest() {
  DatasetManifest m;
  m.name = "synthetic";
  m.records = {
      record(0, "v0", 0, 0, Split::train), record(0, "v0", 1, 0, Split::train),
      record(0, "v1", 0, 2, Split::train), record(0, "v2", 0, 3, Split::train),
      record(1, "v3", 0, 0, Split::test),  record(1, "v4", 0, 2, Split::test),
      record(1, "v5", 0, 3, Split::test),  record(1, "v6", 0, 4, Split::test),
  };
  rebuild_codes_present(&m);
  return m;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("attack taxonomy structure") {
  CHECK(attack_type_of(0).code == 0);
  CHECK_FALSE(is_print_attack(0));
  for (int c = 1; c <= 2; ++c) CHECK(is_print_attack(c));
  for (int c = 3; c <= 4; ++c) CHECK(is_replay_attack(c));
  for (int c = 5; c <= 7; ++c) CHECK(is_mask_attack(c));
  CHECK_THROWS_AS(attack_type_of(8), ContractError);
}

TEST_CASE("manifest validation catches broken invariants") {
  DatasetManifest m = small_manifest();
  validate_manifest(m);

  DatasetManifest bad_label = m;
  bad_label.records[0].is_attack = true;  // code 0 but labeled attack
  CHECK_THROWS_AS(validate_manifest(bad_label), ContractError);

  DatasetManifest dup = m;
  dup.records.push_back(dup.records[0]);
  CHECK_THROWS_AS(validate_manifest(dup), ContractError);

  DatasetManifest leak = m;
  leak.records.push_back(record(0, "v9", 0, 0, Split::test));  // subject 0 in both splits
  rebuild_codes_present(&leak);
  CHECK_THROWS_AS(validate_manifest(leak), ContractError);

  DatasetManifest unknown = m;
  unknown.name = "imagenet";
  CHECK_THROWS_AS(validate_manifest(unknown), ContractError);
}

TEST_CASE("manifest csv round-trips") {
  const auto dir = fresh_dir("pad_manifest_rt");
  const DatasetManifest m = small_manifest();
  save_manifest_csv(m, dir / "m.csv");
  const DatasetManifest back = load_manifest_csv(dir / "m.csv", "synthetic");
  REQUIRE(back.records.size() == m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(back.records[i].image_ref == m.records[i].image_ref);
    CHECK(back.records[i].subject_id == m.records[i].subject_id);
    CHECK(back.records[i].video_id == m.records[i].video_id);
    CHECK(back.records[i].frame_index == m.records[i].frame_index);
    CHECK(back.records[i].is_attack == m.records[i].is_attack);
    CHECK(back.records[i].attack_code == m.records[i].attack_code);
    CHECK(back.records[i].variant == m.records[i].variant);
    CHECK(back.records[i].split == m.records[i].split);
  }
  CHECK(back.attack_codes_present == m.attack_codes_present);
  fs::remove_all(dir);
}

TEST_CASE("rose_youtu split puts the fixed ten subjects in train") {
  DatasetManifest m;
  m.name = "rose_youtu";
  m.records = {record(7, "a", 0, 0, Split::train), record(8, "b", 0, 1, Split::train),
               record(21, "c", 0, 3, Split::train)};
  rebuild_codes_present(&m);
  const DatasetManifest split = rose_youtu_split(m);
  CHECK(split.records[0].split == Split::train);  // subject 7
  CHECK(split.records[1].split == Split::test);   // subject 8
  CHECK(split.records[2].split == Split::test);

  DatasetManifest empty;
  empty.name = "rose_youtu";
  CHECK(rose_youtu_split(empty).records.empty());

  DatasetManifest unknown = m;
  unknown.records.push_back(record(42, "d", 0, 0, Split::train));
  CHECK_THROWS_AS(rose_youtu_split(unknown), ContractError);

  DatasetManifest wrong_name = m;
  wrong_name.name = "nuaa";
  CHECK_THROWS_AS(rose_youtu_split(wrong_name), ContractError);

  CHECK(rose_youtu_known_subjects().size() == 20);
  CHECK(rose_youtu_train_subjects().size() == 10);
}

TEST_CASE("filter_attacks keeps genuine and the requested codes per split") {
  const DatasetManifest m = small_manifest();

  // one-attack setting: the same single code in train and test
  const DatasetManifest one = filter_attacks(m, {2}, {2});
  for (const auto& r : one.records) CHECK((r.attack_code == 0 || r.attack_code == 2));
  CHECK(one.attack_codes_present == std::set<int>({0, 2}));

  // unseen-attack setting: the held-out code only in test
  const DatasetManifest unseen = filter_attacks(m, {2, 3}, {4});
  for (const auto& r : unseen.records) {
    if (r.split == Split::train) CHECK(r.attack_code != 4);
    if (r.split == Split::test) CHECK((r.attack_code == 0 || r.attack_code == 4));
  }

  // degenerate: nothing left in a split
  DatasetManifest attacks_only;
  attacks_only.name = "synthetic";
  attacks_only.records = {record(0, "v0", 0, 2, Split::train),
                          record(1, "v1", 0, 2, Split::test)};
  rebuild_codes_present(&attacks_only);
  CHECK_THROWS_AS(filter_attacks(attacks_only, {}, {2}), ProtocolError);

  CHECK_THROWS_AS(filter_attacks(m, {6}, {6}), ContractError);  // code not present
}

TEST_CASE("synthetic generation is deterministic and paired") {
  const auto dir_a = fresh_dir("pad_synth_a");
  const auto dir_b = fresh_dir("pad_synth_b");
  SyntheticConfig config;
  config.n_subjects = 3;
  config.videos_per_subject = 3;
  config.frames_per_video = 3;
  config.image_size = 32;
  config.seed = 7;
  config.attack_codes = {1, 3};
  const auto [full_a, crop_a] = generate_synthetic(config, dir_a);
  const auto [full_b, crop_b] = generate_synthetic(config, dir_b);

  validate_manifest(full_a);
  validate_manifest(crop_a);

  // byte-identical rerun under the same seed
  CHECK(file_bytes(dir_a / "manifest_full.csv").size() > 0);
  for (size_t i = 0; i < full_a.records.size(); ++i)
    CHECK(file_bytes(full_a.records[i].image_ref) == file_bytes(full_b.records[i].image_ref));

  // index-aligned pairing on (subject, video, frame)
  REQUIRE(full_a.records.size() == crop_a.records.size());
  for (size_t i = 0; i < full_a.records.size(); ++i) {
    CHECK(full_a.records[i].subject_id == crop_a.records[i].subject_id);
    CHECK(full_a.records[i].video_id == crop_a.records[i].video_id);
    CHECK(full_a.records[i].frame_index == crop_a.records[i].frame_index);
    CHECK(full_a.records[i].attack_code == crop_a.records[i].attack_code);
  }

  // split disjointness by subject
  std::set<int> train_subjects, test_subjects;
  for (const auto& r : full_a.records)
    (r.split == Split::train ? train_subjects : test_subjects).insert(r.subject_id);
  for (int s : train_subjects) CHECK_FALSE(test_subjects.count(s));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("synthetic pixel oracle: crops, cue placement, genuine twins") {
  const auto dir = fresh_dir("pad_synth_oracle");
  SyntheticConfig config;
  config.n_subjects = 2;
  config.videos_per_subject = 8;
  config.frames_per_video = 3;
  config.image_size = 64;
  config.seed = 11;
  config.background_cue_classes = {3, 4};
  config.attack_codes = {1, 2, 3, 4, 5, 6, 7};
  const auto [full, crop] = generate_synthetic(config, dir);
  const cv::Rect box = synthetic_crop_box(config.image_size);

  for (size_t i = 0; i < full.records.size(); ++i) {
    const SampleRecord& fr = full.records[i];
    const cv::Mat full_img = cv::imread(fr.image_ref, cv::IMREAD_COLOR);
    const cv::Mat crop_img = cv::imread(crop.records[i].image_ref, cv::IMREAD_COLOR);
    REQUIRE_FALSE(full_img.empty());
    REQUIRE_FALSE(crop_img.empty());

    // crop is exactly the central face region of the full frame
    CHECK(crop_img.rows == box.height);
    CHECK(cv::countNonZero(cv::Mat(full_img(box) != crop_img).reshape(1)) == 0);

    // difference against the genuine twin localizes the artifact
    FrameRenderSpec spec;
    spec.image_size = config.image_size;
    spec.subject_id = fr.subject_id;
    spec.video_index = std::stoi(fr.video_id.substr(fr.video_id.find("_v") + 2));
    spec.frame_index = fr.frame_index;
    spec.attack_code = fr.attack_code;
    spec.background_cue = config.background_cue_classes.count(fr.attack_code) > 0;
    spec.cue_strength = config.cue_strength;
    spec.seed = config.seed;
    spec.draw_artifact = false;
    const cv::Mat twin = render_synthetic_frame(spec);

    bool diff_inside = false, diff_outside = false;
    for (int y = 0; y < full_img.rows; ++y)
      for (int x = 0; x < full_img.cols; ++x) {
        if (full_img.at<cv::Vec3b>(y, x) == twin.at<cv::Vec3b>(y, x)) continue;
        (box.contains(cv::Point(x, y)) ? diff_inside : diff_outside) = true;
      }
    if (fr.attack_code == 0) {
      CHECK_FALSE(diff_inside);
      CHECK_FALSE(diff_outside);
    } else if (config.background_cue_classes.count(fr.attack_code)) {
      CHECK(diff_outside);
      CHECK_FALSE(diff_inside);  // background cue never touches the crop region
    } else {
      CHECK(diff_inside);
      CHECK_FALSE(diff_outside);  // in-face artifact stays inside the crop
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("background cue boxes sit outside the crop box") {
  for (int size : {32, 64, 128}) {
    const cv::Rect crop = synthetic_crop_box(size);
    for (int code = 1; code <= 7; ++code) {
      const cv::Rect cue = synthetic_cue_box(code, size);
      CHECK(cue.area() > 0);
      CHECK((cue & crop).area() == 0);
      CHECK((cue & cv::Rect(0, 0, size, size)) == cue);
    }
  }
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig config;
  config.frames_per_video = 2;
  CHECK_THROWS_AS(validate_synthetic_config(config), ConfigError);
  config.frames_per_video = 3;
  config.image_size = 30;
  CHECK_THROWS_AS(validate_synthetic_config(config), ConfigError);
  config.image_size = 64;
  config.attack_codes = {9};
  CHECK_THROWS_AS(validate_synthetic_config(config), ConfigError);
}

TEST_CASE("batch stream partitions, shuffles deterministically and resizes") {
  const auto dir = fresh_dir("pad_batches");
  SyntheticConfig config;
  config.n_subjects = 2;
  config.videos_per_subject = 5;
  config.frames_per_video = 3;
  config.image_size = 32;
  config.seed = 3;
  const auto [full, crop] = generate_synthetic(config, dir);

  // 1 train subject * 5 videos * 3 frames = 15 records; batches 4,4,4,3
  BatchStream stream(full, Split::train, 64, 4, 123);
  CHECK(stream.size() == 15);
  std::vector<size_t> sizes;
  std::vector<std::string> order_a, order_b;
  stream.for_each_batch(0, [&](const Batch& b) {
    sizes.push_back(b.labels.size());
    CHECK(b.images.dim(2) == 64);  // resized to the model resolution
    for (const auto* r : b.records) order_a.push_back(r->image_ref);
    for (int64_t i = 0; i < b.images.numel(); ++i) {
      CHECK(b.images[i] >= 0.0f);
      CHECK(b.images[i] <= 1.0f);
    }
  });
  CHECK(sizes == std::vector<size_t>({4, 4, 4, 3}));

  stream.for_each_batch(0, [&](const Batch& b) {
    for (const auto* r : b.records) order_b.push_back(r->image_ref);
  });
  CHECK(order_a == order_b);  // same seed, same epoch, same order

  std::vector<std::string> order_epoch1;
  stream.for_each_batch(1, [&](const Batch& b) {
    for (const auto* r : b.records) order_epoch1.push_back(r->image_ref);
  });
  CHECK(order_a != order_epoch1);  // epochs permute differently

  // 10 records at batch 4 -> 4, 4, 2
  DatasetManifest ten = full;
  std::vector<SampleRecord> train_records;
  for (const auto& r : full.records)
    if (r.split == Split::train && train_records.size() < 10) train_records.push_back(r);
  ten.records = train_records;
  rebuild_codes_present(&ten);
  BatchStream ten_stream(ten, Split::train, 32, 4, 1);
  std::vector<size_t> ten_sizes;
  ten_stream.for_each_batch(0, [&](const Batch& b) { ten_sizes.push_back(b.labels.size()); });
  CHECK(ten_sizes == std::vector<size_t>({4, 4, 2}));

  BatchStream plain(full, Split::train, 32, 4, 123, /*shuffle=*/false);
  std::vector<const SampleRecord*> in_order;
  plain.for_each_batch(0, [&](const Batch& b) {
    for (const auto* r : b.records) in_order.push_back(r);
  });
  CHECK(std::is_sorted(in_order.begin(), in_order.end()));  // manifest order preserved

  CHECK_THROWS_AS(BatchStream(full, Split::train, 32, 0, 1), ContractError);
  fs::remove_all(dir);
}

TEST_CASE("extract_frames honors stride and the error contract") {
  const auto dir = fresh_dir("pad_video");
  const fs::path video_path = dir / "clip.avi";
  cv::VideoWriter writer(video_path.string(), cv::VideoWriter::fourcc('M', 'J', 'P', 'G'), 10.0,
                         cv::Size(32, 32));
  REQUIRE(writer.isOpened());
  for (int i = 0; i < 10; ++i) {
    cv::Mat frame(32, 32, CV_8UC3, cv::Scalar(i * 20, 64, 128));
    writer.write(frame);
  }
  writer.release();

  const auto all = extract_frames(video_path.string(), 1);
  CHECK(all.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(all[static_cast<size_t>(i)].frame_index == i);

  const auto strided = extract_frames(video_path.string(), 4);
  REQUIRE(strided.size() == 3);
  CHECK(strided[0].frame_index == 0);
  CHECK(strided[1].frame_index == 4);
  CHECK(strided[2].frame_index == 8);

  // a directory of images behaves like a pre-extracted video
  const fs::path frames_dir = dir / "frames";
  fs::create_directories(frames_dir);
  for (int i = 0; i < 6; ++i) {
    cv::Mat frame(16, 16, CV_8UC3, cv::Scalar(0, i * 30, 0));
    cv::imwrite((frames_dir / (std::to_string(i) + ".png")).string(), frame);
  }
  const auto from_dir = extract_frames(frames_dir.string(), 2);
  REQUIRE(from_dir.size() == 3);
  CHECK(from_dir[2].frame_index == 4);

  // corrupt input: explicit ingestion error naming the file, nothing returned
  const fs::path corrupt = dir / "corrupt.avi";
  std::ofstream(corrupt) << "not a video";
  bool threw = false;
  try {
    extract_frames(corrupt.string(), 1);
  } catch (const IngestionError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("corrupt.avi") != std::string::npos);
  }
  CHECK(threw);
  CHECK_THROWS_AS(extract_frames(video_path.string(), 0), ContractError);
  fs::remove_all(dir);
}

TEST_CASE("crop_face picks the best detection and clips to the image") {
  struct FixedDetector : FaceDetector {
    std::vector<FaceBox> boxes;
    std::vector<FaceBox> detect(const cv::Mat&) const override { return boxes; }
  };

  cv::Mat img(128, 128, CV_8UC3, cv::Scalar(1, 2, 3));
  img(cv::Rect(10, 10, 90, 90)).setTo(cv::Scalar(200, 100, 50));

  FixedDetector det;
  det.boxes = {{cv::Rect(10, 10, 90, 90), 0.9f}};
  const cv::Mat crop = crop_face(img, det);
  CHECK(crop.rows == 90);
  CHECK(crop.cols == 90);
  CHECK(crop.at<cv::Vec3b>(0, 0) == cv::Vec3b(200, 100, 50));

  det.boxes = {{cv::Rect(0, 0, 20, 20), 0.6f}, {cv::Rect(10, 10, 90, 90), 0.9f}};
  CHECK(crop_face(img, det).rows == 90);  // argmax by confidence

  det.boxes.clear();
  CHECK_THROWS_AS(crop_face(img, det), NoFaceError);

  const CenterBoxDetector center(0.5);
  const auto boxes = center.detect(img);
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].box == cv::Rect(32, 32, 64, 64));
}
