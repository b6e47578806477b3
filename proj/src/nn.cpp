#include "pad/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pad::nn {

namespace {

float he_std(int fan_in) { return std::sqrt(2.0f / static_cast<float>(fan_in)); }

void im2col(const Tensor& x, int n, int kernel, int stride, int padding, int out_h, int out_w,
            Tensor* col) {
  const int in_ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  float* dst = col->data();
  for (int c = 0; c < in_ch; ++c) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - padding + ki;
          if (ih < 0 || ih >= h) {
            std::memset(dst, 0, sizeof(float) * out_w);
            dst += out_w;
            continue;
          }
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - padding + kj;
            *dst++ = (iw < 0 || iw >= w) ? 0.0f : x.at(n, c, ih, iw);
          }
        }
      }
    }
  }
}

void col2im(const Tensor& col, int kernel, int stride, int padding, int out_h, int out_w,
            Tensor* gx, int n) {
  const int in_ch = gx->dim(1), h = gx->dim(2), w = gx->dim(3);
  const float* src = col.data();
  for (int c = 0; c < in_ch; ++c) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - padding + ki;
          if (ih < 0 || ih >= h) {
            src += out_w;
            continue;
          }
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - padding + kj;
            if (iw >= 0 && iw < w) gx->at(n, c, ih, iw) += *src;
            ++src;
          }
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int padding,
               std::mt19937& rng)
    : Layer(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
  const int fan_in = in_ch * kernel * kernel;
  weight_ = {this->name() + ".weight", Tensor::randn({out_ch, fan_in}, rng, he_std(fan_in)),
             Tensor::zeros({out_ch, fan_in})};
  bias_ = {this->name() + ".bias", Tensor::zeros({out_ch}), Tensor::zeros({out_ch})};
}

Tensor Conv2d::forward(const Tensor& x, bool /*train*/) {
  if (x.ndim() != 4 || x.dim(1) != in_ch_) throw ContractError(name() + ": bad input shape");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  out_h_ = (h + 2 * padding_ - kernel_) / stride_ + 1;
  out_w_ = (w + 2 * padding_ - kernel_) / stride_ + 1;
  input_ = x;
  cols_.assign(n, Tensor());

  const int ckk = in_ch_ * kernel_ * kernel_;
  const int hw = out_h_ * out_w_;
  Tensor y({n, out_ch_, out_h_, out_w_});
  auto wmat = weight_.value.mat(out_ch_, ckk);
  for (int i = 0; i < n; ++i) {
    cols_[i] = Tensor({ckk, hw});
    im2col(x, i, kernel_, stride_, padding_, out_h_, out_w_, &cols_[i]);
    MatMap ymat(y.data() + static_cast<int64_t>(i) * out_ch_ * hw, out_ch_, hw);
    ymat.noalias() = wmat * cols_[i].mat(ckk, hw);
    for (int c = 0; c < out_ch_; ++c) ymat.row(c).array() += bias_.value[c];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const int n = input_.dim(0);
  const int ckk = in_ch_ * kernel_ * kernel_;
  const int hw = out_h_ * out_w_;
  Tensor gx(input_.shape());
  auto wmat = weight_.value.mat(out_ch_, ckk);
  auto gw = weight_.grad.mat(out_ch_, ckk);
  Tensor gcol({ckk, hw});
  for (int i = 0; i < n; ++i) {
    ConstMatMap gy(grad_out.data() + static_cast<int64_t>(i) * out_ch_ * hw, out_ch_, hw);
    gw.noalias() += gy * cols_[i].mat(ckk, hw).transpose();
    for (int c = 0; c < out_ch_; ++c) bias_.grad[c] += gy.row(c).sum();
    gcol.mat(ckk, hw).noalias() = wmat.transpose() * gy;
    col2im(gcol, kernel_, stride_, padding_, out_h_, out_w_, &gx, i);
  }
  return gx;
}

ConvTranspose2d::ConvTranspose2d(std::string name, int in_ch, int out_ch, std::mt19937& rng)
    : Layer(std::move(name)), in_ch_(in_ch), out_ch_(out_ch) {
  const int fan_in = in_ch;  // each output pixel sees exactly one input pixel
  weight_ = {this->name() + ".weight", Tensor::randn({in_ch, out_ch * 4}, rng, he_std(fan_in)),
             Tensor::zeros({in_ch, out_ch * 4})};
  bias_ = {this->name() + ".bias", Tensor::zeros({out_ch}), Tensor::zeros({out_ch})};
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool /*train*/) {
  if (x.ndim() != 4 || x.dim(1) != in_ch_) throw ContractError(name() + ": bad input shape");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  input_ = x;
  Tensor y({n, out_ch_, h * 2, w * 2});
  for (int i = 0; i < n; ++i)
    for (int co = 0; co < out_ch_; ++co)
      for (int oh = 0; oh < h * 2; ++oh)
        for (int ow = 0; ow < w * 2; ++ow) y.at(i, co, oh, ow) = bias_.value[co];
  for (int i = 0; i < n; ++i)
    for (int ci = 0; ci < in_ch_; ++ci)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) {
          const float v = input_.at(i, ci, ih, iw);
          const float* wrow = weight_.value.data() + static_cast<int64_t>(ci) * out_ch_ * 4;
          for (int co = 0; co < out_ch_; ++co)
            for (int k = 0; k < 4; ++k)
              y.at(i, co, ih * 2 + k / 2, iw * 2 + k % 2) += v * wrow[co * 4 + k];
        }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
  const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  Tensor gx(input_.shape());
  for (int i = 0; i < n; ++i)
    for (int co = 0; co < out_ch_; ++co)
      for (int oh = 0; oh < h * 2; ++oh)
        for (int ow = 0; ow < w * 2; ++ow) bias_.grad[co] += grad_out.at(i, co, oh, ow);
  for (int i = 0; i < n; ++i)
    for (int ci = 0; ci < in_ch_; ++ci)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) {
          const float v = input_.at(i, ci, ih, iw);
          const float* wrow = weight_.value.data() + static_cast<int64_t>(ci) * out_ch_ * 4;
          float* gwrow = weight_.grad.data() + static_cast<int64_t>(ci) * out_ch_ * 4;
          float acc = 0.0f;
          for (int co = 0; co < out_ch_; ++co)
            for (int k = 0; k < 4; ++k) {
              const float g = grad_out.at(i, co, ih * 2 + k / 2, iw * 2 + k % 2);
              acc += g * wrow[co * 4 + k];
              gwrow[co * 4 + k] += g * v;
            }
          gx.at(i, ci, ih, iw) = acc;
        }
  return gx;
}

Dense::Dense(std::string name, int in_dim, int out_dim, std::mt19937& rng)
    : Layer(std::move(name)), in_dim_(in_dim), out_dim_(out_dim) {
  weight_ = {this->name() + ".weight", Tensor::randn({out_dim, in_dim}, rng, he_std(in_dim)),
             Tensor::zeros({out_dim, in_dim})};
  bias_ = {this->name() + ".bias", Tensor::zeros({out_dim}), Tensor::zeros({out_dim})};
}

Tensor Dense::forward(const Tensor& x, bool /*train*/) {
  if (x.ndim() != 2 || x.dim(1) != in_dim_) throw ContractError(name() + ": bad input shape");
  const int n = x.dim(0);
  input_ = x;
  Tensor y({n, out_dim_});
  y.mat(n, out_dim_).noalias() = x.mat(n, in_dim_) * weight_.value.mat(out_dim_, in_dim_).transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out_dim_; ++j) y.at(i, j) += bias_.value[j];
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  const int n = input_.dim(0);
  auto gy = grad_out.mat(n, out_dim_);
  weight_.grad.mat(out_dim_, in_dim_).noalias() += gy.transpose() * input_.mat(n, in_dim_);
  for (int j = 0; j < out_dim_; ++j) bias_.grad[j] += gy.col(j).sum();
  Tensor gx({n, in_dim_});
  gx.mat(n, in_dim_).noalias() = gy * weight_.value.mat(out_dim_, in_dim_);
  return gx;
}

Tensor ReLU::forward(const Tensor& x, bool /*train*/) {
  input_ = x;
  Tensor y = x;
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::max(0.0f, y[i]);
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor gx = grad_out;
  for (int64_t i = 0; i < gx.numel(); ++i)
    if (input_[i] <= 0.0f) gx[i] = 0.0f;
  return gx;
}

Tensor Sigmoid::forward(const Tensor& x, bool /*train*/) {
  Tensor y = x;
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = 1.0f / (1.0f + std::exp(-y[i]));
  output_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
  Tensor gx = grad_out;
  for (int64_t i = 0; i < gx.numel(); ++i) gx[i] *= output_[i] * (1.0f - output_[i]);
  return gx;
}

Tensor MaxPool2::forward(const Tensor& x, bool /*train*/) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ContractError(name() + ": spatial dims must be even");
  in_shape_ = x.shape();
  Tensor y({n, c, h / 2, w / 2});
  argmax_.assign(static_cast<size_t>(y.numel()), 0);
  int64_t oi = 0;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int oh = 0; oh < h / 2; ++oh)
        for (int ow = 0; ow < w / 2; ++ow, ++oi) {
          float best = x.at(i, ch, oh * 2, ow * 2);
          int besti = 0;
          for (int k = 1; k < 4; ++k) {
            const float v = x.at(i, ch, oh * 2 + k / 2, ow * 2 + k % 2);
            if (v > best) {
              best = v;
              besti = k;
            }
          }
          y[oi] = best;
          argmax_[static_cast<size_t>(oi)] = besti;
        }
  return y;
}

Tensor MaxPool2::backward(const Tensor& grad_out) {
  Tensor gx(in_shape_);
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  int64_t oi = 0;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int oh = 0; oh < h / 2; ++oh)
        for (int ow = 0; ow < w / 2; ++ow, ++oi) {
          const int k = argmax_[static_cast<size_t>(oi)];
          gx.at(i, ch, oh * 2 + k / 2, ow * 2 + k % 2) += grad_out[oi];
        }
  return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool /*train*/) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  in_shape_ = x.shape();
  Tensor y({n, c});
  const float inv = 1.0f / static_cast<float>(h * w);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      float sum = 0.0f;
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) sum += x.at(i, ch, ih, iw);
      y.at(i, ch) = sum * inv;
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor gx(in_shape_);
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  const float inv = 1.0f / static_cast<float>(h * w);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float g = grad_out.at(i, ch) * inv;
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) gx.at(i, ch, ih, iw) = g;
    }
  return gx;
}

Dropout::Dropout(std::string name, double rate, uint64_t seed)
    : Layer(std::move(name)), rate_(rate), rng_(static_cast<uint32_t>(seed)) {
  if (rate <= 0.0 || rate >= 1.0) throw ContractError(this->name() + ": rate must be in (0,1)");
}

Tensor Dropout::forward(const Tensor& x, bool train) {
  train_mode_ = train;
  if (!train) return x;
  mask_ = Tensor(x.shape());
  const float keep = 1.0f - static_cast<float>(rate_);
  const float scale = 1.0f / keep;
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  Tensor y = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const float m = dist(rng_) < keep ? scale : 0.0f;
    mask_[i] = m;
    y[i] *= m;
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!train_mode_) return grad_out;
  Tensor gx = grad_out;
  for (int64_t i = 0; i < gx.numel(); ++i) gx[i] *= mask_[i];
  return gx;
}

Tensor Reshape::forward(const Tensor& x, bool /*train*/) {
  batch_ = x.dim(0);
  return x.reshaped({batch_, c_, h_, w_});
}

Tensor Reshape::backward(const Tensor& grad_out) {
  return grad_out.reshaped({batch_, c_ * h_ * w_});
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  outputs_.clear();
  outputs_.reserve(layers_.size());
  Tensor cur = x;
  for (auto& layer : layers_) {
    cur = layer->forward(cur, train);
    outputs_.push_back(cur);
  }
  return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

Tensor Sequential::backward_tap(const Tensor& grad_out, const std::string& layer_name) {
  Tensor g = grad_out;
  for (size_t i = layers_.size(); i-- > 0;) {
    if (layers_[i]->name() == layer_name) return g;
    g = layers_[i]->backward(g);
  }
  throw ContractError("backward_tap: no layer named " + layer_name);
}

const Tensor& Sequential::activation(const std::string& layer_name) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i]->name() == layer_name) {
      if (i >= outputs_.size()) throw ContractError("activation: no cached forward pass");
      return outputs_[i];
    }
  throw ContractError("activation: no layer named " + layer_name);
}

bool Sequential::has_layer(const std::string& layer_name) const {
  for (const auto& l : layers_)
    if (l->name() == layer_name) return true;
  return false;
}

const Layer* Sequential::layer(const std::string& layer_name) const {
  for (const auto& l : layers_)
    if (l->name() == layer_name) return l.get();
  return nullptr;
}

std::string Sequential::last_spatial_layer() const {
  std::string found;
  for (const auto& l : layers_)
    if (l->spatial()) found = l->name();
  if (found.empty()) throw ContractError("no spatial layer in stack");
  return found;
}

std::vector<Param*> Sequential::params() {
  std::vector<Param*> out;
  for (auto& l : layers_)
    for (Param* p : l->params()) out.push_back(p);
  return out;
}

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr_ <= 0.0) throw ContractError("adam: learning rate must be positive");
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<size_t>(params_[i]->value.numel()), 0.0f);
    v_[i].assign(static_cast<size_t>(params_[i]->value.numel()), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    for (int64_t j = 0; j < p.value.numel(); ++j) {
      const float g = p.grad[j];
      float& m = m_[i][static_cast<size_t>(j)];
      float& v = v_[i][static_cast<size_t>(j)];
      m = static_cast<float>(beta1_) * m + (1.0f - static_cast<float>(beta1_)) * g;
      v = static_cast<float>(beta2_) * v + (1.0f - static_cast<float>(beta2_)) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p.value[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void Adam::zero_grad() { zero_grads(params_); }

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->grad.zero();
}

uint64_t params_checksum(const std::vector<Param*>& params) {
  uint64_t h = 1469598103934665603ULL;
  for (const Param* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    const size_t n = static_cast<size_t>(p->value.numel()) * sizeof(float);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(0) != b.dim(0))
    throw ContractError("concat_cols: shape mismatch");
  const int n = a.dim(0), d1 = a.dim(1), d2 = b.dim(1);
  Tensor out({n, d1 + d2});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d1; ++j) out.at(i, j) = a.at(i, j);
    for (int j = 0; j < d2; ++j) out.at(i, d1 + j) = b.at(i, j);
  }
  return out;
}

void split_cols(const Tensor& joined, int d1, Tensor* a, Tensor* b) {
  if (joined.ndim() != 2 || joined.dim(1) < d1) throw ContractError("split_cols: bad shapes");
  const int n = joined.dim(0), d2 = joined.dim(1) - d1;
  *a = Tensor({n, d1});
  *b = Tensor({n, d2});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d1; ++j) a->at(i, j) = joined.at(i, j);
    for (int j = 0; j < d2; ++j) b->at(i, j) = joined.at(i, d1 + j);
  }
}

Tensor onehot(const std::vector<int>& labels, int num_classes) {
  Tensor out({static_cast<int>(labels.size()), num_classes});
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw ContractError("onehot: label out of range");
    out.at(static_cast<int>(i), labels[i]) = 1.0f;
  }
  return out;
}

}  // namespace pad::nn
