#include "pad/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace pad {

Tensor softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) throw ContractError("softmax_rows: expected (N, K) tensor");
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  Tensor probs({n, k});
  for (int i = 0; i < n; ++i) {
    float m = logits.at(i, 0);
    for (int j = 1; j < k; ++j) m = std::max(m, logits.at(i, j));
    float sum = 0.0f;
    for (int j = 0; j < k; ++j) {
      const float e = std::exp(logits.at(i, j) - m);
      probs.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < k; ++j) probs.at(i, j) /= sum;
  }
  return probs;
}

}  // namespace pad
