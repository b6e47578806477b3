#ifndef PAD_BATCH_HPP_
#define PAD_BATCH_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "pad/manifest.hpp"
#include "pad/tensor.hpp"

namespace pad {

struct Batch {
  Tensor images;  // (B, 3, S, S), values in [0, 1]
  std::vector<int> labels;        // 0 genuine / 1 attack
  std::vector<int> attack_codes;  // AttackType codes
  std::vector<const SampleRecord*> records;
};

using BatchObserver = std::function<void(const Batch&)>;

// Serves one split of a manifest as mini-batches. Images are decoded once,
// resized to the model input resolution and kept in memory (desk-scale
// datasets). Epoch order is a deterministic function of (seed, epoch).
class BatchStream {
 public:
  BatchStream(const DatasetManifest& manifest, Split split, int input_size, int batch_size,
              uint64_t shuffle_seed, bool shuffle = true);

  size_t size() const { return records_.size(); }
  int input_size() const { return input_size_; }

  void for_each_batch(int epoch, const std::function<void(const Batch&)>& fn) const;

  // Assembles a batch from explicit record indices (used by the DFS passes).
  Batch gather(const std::vector<size_t>& indices) const;

  // All records of the split in manifest order, as one tensor.
  Tensor all_images() const;
  const std::vector<const SampleRecord*>& records() const { return records_; }

 private:

  int input_size_;
  int batch_size_;
  uint64_t seed_;
  bool shuffle_;
  std::vector<const SampleRecord*> records_;
  std::vector<std::vector<uint8_t>> pixels_;  // resized, CHW, one per record
};

// Loads and resizes the given records into a (N, 3, S, S) tensor.
Tensor load_images(const std::vector<const SampleRecord*>& records, int input_size);

}  // namespace pad

#endif  // PAD_BATCH_HPP_
