#include "pad/batch.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <numeric>
#include <random>

namespace pad {

namespace {

std::vector<uint8_t> load_chw(const std::string& path, int size) {
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
  if (img.empty()) throw IngestionError("cannot decode image: " + path);
  if (img.cols != size || img.rows != size)
    cv::resize(img, img, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  std::vector<uint8_t> chw(static_cast<size_t>(3) * size * size);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        chw[(static_cast<size_t>(c) * size + y) * size + x] = img.at<cv::Vec3b>(y, x)[c];
  return chw;
}

void fill_image(Tensor* out, int n, const std::vector<uint8_t>& chw) {
  const int64_t plane = static_cast<int64_t>(out->dim(1)) * out->dim(2) * out->dim(3);
  float* dst = out->data() + n * plane;
  for (int64_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(chw[static_cast<size_t>(i)]) / 255.0f;
}

}  // namespace

BatchStream::BatchStream(const DatasetManifest& manifest, Split split, int input_size,
                         int batch_size, uint64_t shuffle_seed, bool shuffle)
    : input_size_(input_size), batch_size_(batch_size), seed_(shuffle_seed), shuffle_(shuffle) {
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  for (const auto& r : manifest.records)
    if (r.split == split) records_.push_back(&r);
  pixels_.reserve(records_.size());
  for (const auto* r : records_) pixels_.push_back(load_chw(r->image_ref, input_size_));
}

Batch BatchStream::gather(const std::vector<size_t>& indices) const {
  Batch batch;
  batch.images = Tensor({static_cast<int>(indices.size()), 3, input_size_, input_size_});
  for (size_t i = 0; i < indices.size(); ++i) {
    const SampleRecord* r = records_[indices[i]];
    fill_image(&batch.images, static_cast<int>(i), pixels_[indices[i]]);
    batch.labels.push_back(r->is_attack ? 1 : 0);
    batch.attack_codes.push_back(r->attack_code);
    batch.records.push_back(r);
  }
  return batch;
}

void BatchStream::for_each_batch(int epoch, const std::function<void(const Batch&)>& fn) const {
  std::vector<size_t> order(records_.size());
  std::iota(order.begin(), order.end(), size_t{0});
  if (shuffle_) {
    std::mt19937_64 rng(mix_seed(seed_, static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
  }
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size_)) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size_));
    fn(gather(std::vector<size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(end))));
  }
}

Tensor BatchStream::all_images() const {
  Tensor out({static_cast<int>(records_.size()), 3, input_size_, input_size_});
  for (size_t i = 0; i < records_.size(); ++i) fill_image(&out, static_cast<int>(i), pixels_[i]);
  return out;
}

Tensor load_images(const std::vector<const SampleRecord*>& records, int input_size) {
  Tensor out({static_cast<int>(records.size()), 3, input_size, input_size});
  for (size_t i = 0; i < records.size(); ++i)
    fill_image(&out, static_cast<int>(i), load_chw(records[i]->image_ref, input_size));
  return out;
}

}  // namespace pad
