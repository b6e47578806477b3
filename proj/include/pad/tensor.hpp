#ifndef PAD_TENSOR_HPP_
#define PAD_TENSOR_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "pad/error.hpp"

namespace pad {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Dense float tensor, row-major, up to 4 dims. Images use NCHW, feature
// batches use (N, D).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel_of(shape_), 0.0f);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor randn(std::vector<int> shape, std::mt19937& rng, float stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<float> dist(0.0f, stddev);
    for (auto& v : t.data_) v = dist(rng);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // (N, D) indexing
  float& at(int n, int d) { return data_[static_cast<size_t>(n) * shape_[1] + d]; }
  float at(int n, int d) const { return data_[static_cast<size_t>(n) * shape_[1] + d]; }

  // NCHW indexing
  float& at(int n, int c, int h, int w) {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  float at(int n, int c, int h, int w) const {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(0.0f); }

  Tensor reshaped(std::vector<int> shape) const {
    if (numel_of(shape) != numel())
      throw ContractError("tensor reshape: element count mismatch");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // 2-D Eigen view; the tensor must have exactly rows*cols elements.
  MatMap mat(int rows, int cols) {
    if (static_cast<int64_t>(rows) * cols != numel())
      throw ContractError("tensor mat view: size mismatch");
    return MatMap(data_.data(), rows, cols);
  }
  ConstMatMap mat(int rows, int cols) const {
    if (static_cast<int64_t>(rows) * cols != numel())
      throw ContractError("tensor mat view: size mismatch");
    return ConstMatMap(data_.data(), rows, cols);
  }

  Tensor& operator+=(const Tensor& other) {
    if (!same_shape(other)) throw ContractError("tensor +=: shape mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(float s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

 private:
  static int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = shape.empty() ? 0 : 1;
    for (int d : shape) {
      if (d < 0) throw ContractError("tensor shape: negative dimension");
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<float> data_;
};

// Row-wise softmax of a (N, K) logits tensor, numerically stabilized.
Tensor softmax_rows(const Tensor& logits);

// Deterministic 64-bit mix for deriving per-item RNG streams from a seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pad

#endif  // PAD_TENSOR_HPP_
