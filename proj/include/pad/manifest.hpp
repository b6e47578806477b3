#ifndef PAD_MANIFEST_HPP_
#define PAD_MANIFEST_HPP_

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "pad/error.hpp"

namespace pad {

enum class Split { train, test };
enum class Variant { full, crop };

std::string to_string(Split s);
std::string to_string(Variant v);
Split split_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

// ROSE-Youtu attack taxonomy. Code 0 is bona fide; 1-2 print attacks,
// 3-4 replay attacks, 5-7 paper-mask attacks.
struct AttackType {
  int code = 0;
  std::string description;
};

AttackType attack_type_of(int code);
bool is_print_attack(int code);
bool is_replay_attack(int code);
bool is_mask_attack(int code);
inline constexpr int kNumAttackClasses = 8;  // genuine + 7 attacks

struct SampleRecord {
  std::string image_ref;  // path of the stored PNG
  int subject_id = 0;
  std::string video_id;
  int frame_index = 0;
  bool is_attack = false;
  int attack_code = 0;
  Variant variant = Variant::full;
  Split split = Split::train;
};

struct DatasetManifest {
  std::string name;  // rose_youtu | nuaa | replay_attack | synthetic
  std::vector<SampleRecord> records;
  std::set<int> attack_codes_present;
};

bool is_known_dataset_name(const std::string& name);

// Recomputes attack_codes_present from the records.
void rebuild_codes_present(DatasetManifest* manifest);

// Checks the manifest invariants: label/code consistency, frame uniqueness
// per (video, variant), split disjointness over subjects, codes_present.
void validate_manifest(const DatasetManifest& manifest);

// CSV columns: path,subject_id,video_id,frame_index,label,attack_type,variant,split
void save_manifest_csv(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest_csv(const std::filesystem::path& path, const std::string& name);

// Subject-disjoint split for ROSE-Youtu: the ten training subjects fixed by
// the dataset protocol go to train, every other known subject to test.
DatasetManifest rose_youtu_split(DatasetManifest manifest);
const std::set<int>& rose_youtu_train_subjects();
const std::set<int>& rose_youtu_known_subjects();

// Keeps genuine records everywhere; train keeps attacks in train_codes only,
// test keeps attacks in test_codes only. Throws ProtocolError if a split
// comes out empty.
DatasetManifest filter_attacks(const DatasetManifest& manifest, const std::set<int>& train_codes,
                               const std::set<int>& test_codes);

}  // namespace pad

#endif  // PAD_MANIFEST_HPP_
