#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pad/nn.hpp"

using namespace pad;
using namespace pad::nn;

namespace {

std::mt19937 rng(777);

Tensor random_tensor(std::vector<int> shape, float scale = 1.0f, float offset = 0.0f) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> dist(-scale, scale);
  for (int64_t i = 0; i < t.numel(); ++i) {
    float v = dist(rng) + offset;
    if (std::abs(v) < 0.05f) v += v >= 0 ? 0.1f : -0.1f;  // keep away from relu kinks
    t[i] = v;
  }
  return t;
}

// J = sum(weights .* layer(x)); FD on float tensors
constexpr float kH = 1e-2f;
constexpr float kRelTol = 3e-2f;

double objective(Layer& layer, const Tensor& x, const Tensor& w, bool train) {
  const Tensor y = layer.forward(x, train);
  double j = 0;
  for (int64_t i = 0; i < y.numel(); ++i) j += static_cast<double>(w[i]) * y[i];
  return j;
}

void check_close(double analytic, double fd) {
  const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-2});
  CHECK(std::abs(analytic - fd) / denom < kRelTol);
}

// checks d J / d input and d J / d params against finite differences
void grad_check(Layer& layer, Tensor x, bool train = false) {
  Tensor probe = layer.forward(x, train);
  Tensor w = random_tensor(probe.shape());
  for (Param* p : layer.params()) p->grad.zero();
  const Tensor gx = layer.backward(w);
  REQUIRE(gx.shape() == x.shape());

  std::mt19937 picker(99);
  for (int trial = 0; trial < 12; ++trial) {
    const int64_t i = static_cast<int64_t>(picker() % x.numel());
    Tensor lo = x, hi = x;
    lo[i] -= kH;
    hi[i] += kH;
    const double fd = (objective(layer, hi, w, train) - objective(layer, lo, w, train)) / (2 * kH);
    check_close(gx[i], fd);
  }
  layer.forward(x, train);  // restore cache for parameter FD below
  for (Param* p : layer.params()) {
    for (int trial = 0; trial < 8; ++trial) {
      const int64_t i = static_cast<int64_t>(picker() % p->value.numel());
      const float keep = p->value[i];
      p->value[i] = keep - kH;
      const double lo = objective(layer, x, w, train);
      p->value[i] = keep + kH;
      const double hi = objective(layer, x, w, train);
      p->value[i] = keep;
      check_close(p->grad[i], (hi - lo) / (2 * kH));
    }
  }
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  t.at(1, 2) = 5.0f;
  CHECK(t[5] == 5.0f);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ContractError);
  const Tensor r = t.reshaped({3, 2});
  CHECK(r.dim(0) == 3);
  CHECK_THROWS_AS(t.mat(5, 5), ContractError);
}

TEST_CASE("softmax rows sum to one for random logits") {
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6), k = 2 + static_cast<int>(rng() % 7);
    const Tensor probs = softmax_rows(random_tensor({n, k}, 6.0f));
    for (int i = 0; i < n; ++i) {
      double sum = 0;
      for (int j = 0; j < k; ++j) {
        CHECK(probs.at(i, j) >= 0.0f);
        sum += probs.at(i, j);
      }
      CHECK(std::abs(sum - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("conv2d gradients") {
  Conv2d conv("conv", 2, 3, 3, 1, 1, rng);
  grad_check(conv, random_tensor({2, 2, 6, 6}));
}

TEST_CASE("conv2d output shape") {
  Conv2d conv("conv", 3, 8, 3, 1, 1, rng);
  const Tensor y = conv.forward(random_tensor({2, 3, 16, 16}), false);
  CHECK(y.shape() == std::vector<int>({2, 8, 16, 16}));
  CHECK_THROWS_AS(conv.forward(random_tensor({2, 2, 16, 16}), false), ContractError);
}

TEST_CASE("conv transpose gradients and doubling") {
  ConvTranspose2d up("up", 3, 2, rng);
  const Tensor y = up.forward(random_tensor({1, 3, 4, 4}), false);
  CHECK(y.shape() == std::vector<int>({1, 2, 8, 8}));
  ConvTranspose2d up2("up2", 2, 3, rng);
  grad_check(up2, random_tensor({2, 2, 3, 3}));
}

TEST_CASE("dense gradients") {
  Dense dense("fc", 5, 4, rng);
  grad_check(dense, random_tensor({3, 5}));
}

TEST_CASE("relu and sigmoid gradients") {
  ReLU relu("relu");
  grad_check(relu, random_tensor({2, 3, 4, 4}));
  Sigmoid sig("sig");
  grad_check(sig, random_tensor({2, 6}));
}

TEST_CASE("maxpool and gap gradients") {
  MaxPool2 pool("pool");
  grad_check(pool, random_tensor({2, 3, 4, 4}, 2.0f));
  GlobalAvgPool gap("gap");
  grad_check(gap, random_tensor({2, 3, 4, 4}));
  MaxPool2 odd("odd");
  CHECK_THROWS_AS(odd.forward(random_tensor({1, 1, 5, 5}), false), ContractError);
}

TEST_CASE("dropout is identity in eval mode and masks consistently in train mode") {
  Dropout drop("drop", 0.5, 42);
  const Tensor x = random_tensor({4, 10});
  const Tensor eval_out = drop.forward(x, false);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(eval_out[i] == x[i]);

  const Tensor train_out = drop.forward(x, true);
  const Tensor g = random_tensor({4, 10});
  const Tensor gx = drop.backward(g);
  int dropped = 0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (train_out[i] == 0.0f && x[i] != 0.0f) {
      ++dropped;
      CHECK(gx[i] == 0.0f);
    } else {
      CHECK(train_out[i] == doctest::Approx(x[i] * 2.0f));
      CHECK(gx[i] == doctest::Approx(g[i] * 2.0f));
    }
  }
  CHECK(dropped > 5);  // rate 0.5 over 40 values
  CHECK_THROWS_AS(Dropout("bad", 1.5, 0), ContractError);
}

TEST_CASE("sequential forward caches activations and taps gradients") {
  Sequential seq;
  seq.emplace<Conv2d>("conv1", 1, 2, 3, 1, 1, rng);
  seq.emplace<ReLU>("relu1");
  seq.emplace<MaxPool2>("pool1");
  seq.emplace<GlobalAvgPool>("gap");
  const Tensor x = random_tensor({1, 1, 4, 4});
  const Tensor y = seq.forward(x, false);
  CHECK(y.shape() == std::vector<int>({1, 2}));
  CHECK(seq.activation("conv1").shape() == std::vector<int>({1, 2, 4, 4}));
  CHECK(seq.last_spatial_layer() == "conv1");

  Tensor g({1, 2});
  g.fill(1.0f);
  const Tensor tap = seq.backward_tap(g, "conv1");
  CHECK(tap.shape() == std::vector<int>({1, 2, 4, 4}));
  CHECK_THROWS_AS(seq.backward_tap(g, "nope"), ContractError);
}

TEST_CASE("adam minimizes a quadratic") {
  Param p{"p", Tensor({4}), Tensor({4})};
  for (int i = 0; i < 4; ++i) p.value[i] = 5.0f;
  Adam opt({&p}, 0.1);
  double first = 0;
  double last = 0;
  for (int step = 0; step < 200; ++step) {
    double loss = 0;
    for (int i = 0; i < 4; ++i) {
      const float d = p.value[i] - 1.0f;
      loss += d * d;
      p.grad[i] = 2.0f * d;
    }
    if (step == 0) first = loss;
    last = loss;
    opt.step();
    opt.zero_grad();
  }
  CHECK(last < first * 1e-3);
  CHECK_THROWS_AS(Adam({&p}, 0.0), ContractError);
}

TEST_CASE("concat and split are inverse") {
  const Tensor a = random_tensor({3, 4});
  const Tensor b = random_tensor({3, 2});
  const Tensor joined = concat_cols(a, b);
  CHECK(joined.shape() == std::vector<int>({3, 6}));
  Tensor a2, b2;
  split_cols(joined, 4, &a2, &b2);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a2[i] == a[i]);
  for (int64_t i = 0; i < b.numel(); ++i) CHECK(b2[i] == b[i]);
}

TEST_CASE("params checksum changes with values") {
  Dense dense("fc", 3, 3, rng);
  const uint64_t before = params_checksum(dense.params());
  CHECK(before == params_checksum(dense.params()));
  dense.params()[0]->value[0] += 1.0f;
  CHECK(before != params_checksum(dense.params()));
}

TEST_CASE("onehot") {
  const Tensor y = onehot({1, 0, 2}, 3);
  CHECK(y.at(0, 1) == 1.0f);
  CHECK(y.at(1, 0) == 1.0f);
  CHECK(y.at(2, 2) == 1.0f);
  CHECK(y.at(0, 0) == 0.0f);
  CHECK_THROWS_AS(onehot({3}, 3), ContractError);
}
