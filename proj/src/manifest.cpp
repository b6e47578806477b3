#include "pad/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace pad {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string to_string(Variant v) { return v == Variant::full ? "full" : "crop"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ContractError("unknown split: " + s);
}

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "crop") return Variant::crop;
  throw ContractError("unknown variant: " + s);
}

AttackType attack_type_of(int code) {
  static const char* kDescriptions[kNumAttackClasses] = {
      "genuine (bona fide)",
      "print attack, still paper",
      "print attack, quivering paper",
      "replay attack, laptop LCD",
      "replay attack, high-resolution LCD",
      "paper mask, eyes and mouth cut out",
      "paper mask, full",
      "paper mask, upper half cut",
  };
  if (code < 0 || code >= kNumAttackClasses)
    throw ContractError("attack code out of range: " + std::to_string(code));
  return {code, kDescriptions[code]};
}

bool is_print_attack(int code) { return code == 1 || code == 2; }
bool is_replay_attack(int code) { return code == 3 || code == 4; }
bool is_mask_attack(int code) { return code >= 5 && code <= 7; }

bool is_known_dataset_name(const std::string& name) {
  return name == "rose_youtu" || name == "nuaa" || name == "replay_attack" ||
         name == "synthetic";
}

void rebuild_codes_present(DatasetManifest* manifest) {
  manifest->attack_codes_present.clear();
  for (const auto& r : manifest->records) manifest->attack_codes_present.insert(r.attack_code);
}

void validate_manifest(const DatasetManifest& manifest) {
  if (!is_known_dataset_name(manifest.name))
    throw ContractError("manifest validation: unknown dataset name " + manifest.name);
  std::set<int> train_subjects, test_subjects;
  std::set<std::tuple<std::string, int, int>> frame_keys;  // (video, variant, frame)
  for (const auto& r : manifest.records) {
    if (r.attack_code < 0 || r.attack_code >= kNumAttackClasses)
      throw ContractError("manifest validation: attack code out of range in " + r.image_ref);
    if (r.is_attack != (r.attack_code != 0))
      throw ContractError("manifest validation: label/attack_type mismatch in " + r.image_ref);
    if (r.frame_index < 0)
      throw ContractError("manifest validation: negative frame index in " + r.image_ref);
    if (!manifest.attack_codes_present.count(r.attack_code))
      throw ContractError("manifest validation: attack code missing from attack_codes_present");
    if (!frame_keys.insert({r.video_id, static_cast<int>(r.variant), r.frame_index}).second)
      throw ContractError("manifest validation: duplicate frame " + std::to_string(r.frame_index) +
                          " in video " + r.video_id);
    (r.split == Split::train ? train_subjects : test_subjects).insert(r.subject_id);
  }
  for (int s : train_subjects)
    if (test_subjects.count(s))
      throw ContractError("manifest validation: subject " + std::to_string(s) +
                          " appears in both splits");
}

void save_manifest_csv(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write manifest: " + path.string());
  out << "path,subject_id,video_id,frame_index,label,attack_type,variant,split\n";
  for (const auto& r : manifest.records)
    out << r.image_ref << ',' << r.subject_id << ',' << r.video_id << ',' << r.frame_index << ','
        << (r.is_attack ? "attack" : "genuine") << ',' << r.attack_code << ','
        << to_string(r.variant) << ',' << to_string(r.split) << '\n';
}

DatasetManifest load_manifest_csv(const std::filesystem::path& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read manifest: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty manifest: " + path.string());
  DatasetManifest manifest;
  manifest.name = name;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) throw IngestionError("malformed manifest row: " + line);
    SampleRecord r;
    r.image_ref = fields[0];
    r.subject_id = std::stoi(fields[1]);
    r.video_id = fields[2];
    r.frame_index = std::stoi(fields[3]);
    if (fields[4] != "attack" && fields[4] != "genuine")
      throw IngestionError("unknown label in manifest row: " + line);
    r.is_attack = fields[4] == "attack";
    r.attack_code = std::stoi(fields[5]);
    r.variant = variant_from_string(fields[6]);
    r.split = split_from_string(fields[7]);
    manifest.records.push_back(std::move(r));
  }
  rebuild_codes_present(&manifest);
  return manifest;
}

const std::set<int>& rose_youtu_train_subjects() {
  static const std::set<int> kTrain = {2, 3, 4, 5, 6, 7, 9, 10, 11, 12};
  return kTrain;
}

const std::set<int>& rose_youtu_known_subjects() {
  // 20 subjects total; the ten training ids plus the remaining ten.
  static const std::set<int> kKnown = {2,  3,  4,  5,  6,  7,  8,  9,  10, 11,
                                       12, 13, 14, 15, 16, 17, 18, 19, 20, 21};
  return kKnown;
}

DatasetManifest rose_youtu_split(DatasetManifest manifest) {
  if (manifest.name != "rose_youtu")
    throw ContractError("rose_youtu_split: manifest is " + manifest.name);
  for (auto& r : manifest.records) {
    if (!rose_youtu_known_subjects().count(r.subject_id))
      throw ContractError("rose_youtu_split: unknown subject id " + std::to_string(r.subject_id));
    r.split = rose_youtu_train_subjects().count(r.subject_id) ? Split::train : Split::test;
  }
  return manifest;
}

DatasetManifest filter_attacks(const DatasetManifest& manifest, const std::set<int>& train_codes,
                               const std::set<int>& test_codes) {
  for (const auto& codes : {&train_codes, &test_codes})
    for (int c : *codes) {
      if (c == 0) throw ContractError("filter_attacks: code 0 is genuine, not an attack");
      if (!manifest.attack_codes_present.count(c))
        throw ContractError("filter_attacks: code " + std::to_string(c) +
                            " not present in manifest");
    }
  DatasetManifest out;
  out.name = manifest.name;
  size_t n_train = 0, n_test = 0;
  for (const auto& r : manifest.records) {
    const auto& keep = r.split == Split::train ? train_codes : test_codes;
    if (r.attack_code != 0 && !keep.count(r.attack_code)) continue;
    (r.split == Split::train ? n_train : n_test) += 1;
    out.records.push_back(r);
  }
  if (n_train == 0) throw ProtocolError("filter_attacks: train split is empty after filtering");
  if (n_test == 0) throw ProtocolError("filter_attacks: test split is empty after filtering");
  rebuild_codes_present(&out);
  return out;
}

}  // namespace pad
