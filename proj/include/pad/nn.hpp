#ifndef PAD_NN_HPP_
#define PAD_NN_HPP_

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pad/tensor.hpp"

namespace pad::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// A differentiable layer. forward() caches whatever backward() needs, so calls
// must be paired: forward, then backward against the same input.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  // Returns the gradient w.r.t. the layer input; accumulates parameter grads.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual bool spatial() const { return false; }  // produces (N,C,H,W) feature maps

 private:
  std::string name_;
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int padding,
         std::mt19937& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  bool spatial() const override { return true; }

 private:
  int in_ch_, out_ch_, kernel_, stride_, padding_;
  Param weight_;  // (out_ch, in_ch * k * k)
  Param bias_;    // (out_ch)
  Tensor input_;
  std::vector<Tensor> cols_;  // cached im2col matrices, one per image
  int out_h_ = 0, out_w_ = 0;
};

// Transposed convolution with kernel 2, stride 2: exact spatial doubling.
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::string name, int in_ch, int out_ch, std::mt19937& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  bool spatial() const override { return true; }

 private:
  int in_ch_, out_ch_;
  Param weight_;  // (in_ch, out_ch * 2 * 2)
  Param bias_;    // (out_ch)
  Tensor input_;
};

class Dense : public Layer {
 public:
  Dense(std::string name, int in_dim, int out_dim, std::mt19937& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  int in_dim_, out_dim_;
  Param weight_;  // (out_dim, in_dim)
  Param bias_;    // (out_dim)
  Tensor input_;
};

class ReLU : public Layer {
 public:
  // spatial marks trunk ReLUs whose rectified maps can feed the CAM tap
  explicit ReLU(std::string name, bool spatial = false)
      : Layer(std::move(name)), spatial_(spatial) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  bool spatial() const override { return spatial_; }

 private:
  bool spatial_ = false;
  Tensor input_;
};

class Sigmoid : public Layer {
 public:
  explicit Sigmoid(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor output_;
};

// 2x2 max pooling with stride 2; spatial dims must be even.
class MaxPool2 : public Layer {
 public:
  explicit MaxPool2(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int32_t> argmax_;
  std::vector<int> in_shape_;
};

class GlobalAvgPool : public Layer {
 public:
  explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> in_shape_;
};

// Inverted dropout; identity in eval mode. Owns its RNG stream so training
// runs are reproducible under a fixed seed.
class Dropout : public Layer {
 public:
  Dropout(std::string name, double rate, uint64_t seed);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double rate_;
  std::mt19937 rng_;
  Tensor mask_;
  bool train_mode_ = false;
};

// (N, D) -> (N, C, H, W)
class Reshape : public Layer {
 public:
  Reshape(std::string name, int c, int h, int w)
      : Layer(std::move(name)), c_(c), h_(h), w_(w) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  int c_, h_, w_;
  int batch_ = 0;
};

// A layer stack that keeps per-layer outputs, so gradients can be tapped at a
// named layer (used by the class-activation mapping).
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  template <typename L, typename... Args>
  L* emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);

  // Backward pass that stops once the gradient reaching `layer_name`'s output
  // has been captured. Returns that gradient.
  Tensor backward_tap(const Tensor& grad_out, const std::string& layer_name);

  const Tensor& activation(const std::string& layer_name) const;
  bool has_layer(const std::string& layer_name) const;
  const Layer* layer(const std::string& layer_name) const;
  // Name of the deepest spatial (feature-map) layer.
  std::string last_spatial_layer() const;

  std::vector<Param*> params();
  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor> outputs_;
};

// Adam with bias correction over one parameter group.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, double lr = 0.001, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad();
  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

void zero_grads(const std::vector<Param*>& params);

// FNV-1a over the raw parameter bytes; used to assert a group was untouched.
uint64_t params_checksum(const std::vector<Param*>& params);

// (N, D1) ++ (N, D2) -> (N, D1 + D2) and its inverse.
Tensor concat_cols(const Tensor& a, const Tensor& b);
void split_cols(const Tensor& joined, int d1, Tensor* a, Tensor* b);

Tensor onehot(const std::vector<int>& labels, int num_classes);

}  // namespace pad::nn

#endif  // PAD_NN_HPP_
