#include "pad/losses.hpp"

#include <algorithm>
#include <cmath>

namespace pad {

namespace {

inline double clamp_prob(double p) {
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

void check_rows(const DMat& a, const DMat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError(what);
}

}  // namespace

double bce(const DVec& y, const DVec& p) {
  if (y.size() != p.size()) throw ContractError("bce: label/probability length mismatch");
  if (y.size() == 0) throw ContractError("bce: empty batch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = clamp_prob(p[i]);
    sum += -(y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi));
  }
  return sum / static_cast<double>(y.size());
}

double ce(const DMat& y_onehot, const DMat& p) {
  check_rows(y_onehot, p, "ce: label/probability shape mismatch");
  if (p.rows() == 0) throw ContractError("ce: empty batch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      sum += -y_onehot(i, c) * std::log(clamp_prob(p(i, c)));
  return sum / static_cast<double>(p.rows());
}

double loss_multi(const DVec& y1, const DVec& p1, const DMat& y2, const DMat& p2) {
  return bce(y1, p1) + ce(y2, p2);
}

double mse(const DMat& x, const DMat& y) {
  check_rows(x, y, "mse: shape mismatch");
  if (x.rows() == 0) throw ContractError("mse: empty batch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double d = x(i, j) - y(i, j);
      sum += d * d;
    }
  return sum / static_cast<double>(x.rows());
}

double loss_adv(const DMat& e1, const DMat& e2, const DMat& e1_recon, const DMat& e2_recon) {
  check_rows(e1, e1_recon, "loss_adv: e1 reconstruction shape mismatch");
  check_rows(e2, e2_recon, "loss_adv: e2 reconstruction shape mismatch");
  return -mse(e1, e1_recon) - mse(e2, e2_recon);
}

double loss_class_bc(const DVec& y, const DVec& p, const DMat& x, const DMat& x_recon,
                     double alpha) {
  return bce(y, p) + alpha * mse(x, x_recon);
}

double loss_class_mt(const DVec& y1, const DVec& p1, const DMat& y2, const DMat& p2,
                     const DMat& x, const DMat& x_recon, double alpha) {
  return loss_multi(y1, p1, y2, p2) + alpha * mse(x, x_recon);
}

DVec bce_grad_p(const DVec& y, const DVec& p) {
  if (y.size() != p.size()) throw ContractError("bce_grad_p: length mismatch");
  DVec g(p.size());
  const double inv_n = 1.0 / static_cast<double>(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = clamp_prob(p[i]);
    g[i] = inv_n * (-(y[i] / pi) + (1.0 - y[i]) / (1.0 - pi));
  }
  return g;
}

DMat ce_grad_p(const DMat& y_onehot, const DMat& p) {
  check_rows(y_onehot, p, "ce_grad_p: shape mismatch");
  DMat g(p.rows(), p.cols());
  const double inv_n = 1.0 / static_cast<double>(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      g(i, c) = -inv_n * y_onehot(i, c) / clamp_prob(p(i, c));
  return g;
}

DMat mse_grad_x(const DMat& x, const DMat& y) {
  check_rows(x, y, "mse_grad_x: shape mismatch");
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  return (2.0 * inv_n) * (x - y);
}

AdvGrads loss_adv_grads(const DMat& e1, const DMat& e2, const DMat& e1_recon,
                        const DMat& e2_recon) {
  AdvGrads g;
  g.e1 = -mse_grad_x(e1, e1_recon);
  g.e1_recon = mse_grad_x(e1, e1_recon);  // d(-mse)/d recon = +2(e1 - recon)/n
  g.e2 = -mse_grad_x(e2, e2_recon);
  g.e2_recon = mse_grad_x(e2, e2_recon);
  return g;
}

double alpha_at(const AlphaSchedule& schedule, int epoch) {
  if (epoch < 0) throw ContractError("alpha_at: negative epoch");
  // Accumulate in extended precision and round once; alpha0 + step * epoch
  // then agrees exactly with the closed form for the default schedule.
  const long double a =
      static_cast<long double>(schedule.alpha0) +
      static_cast<long double>(schedule.step) * static_cast<long double>(epoch);
  double alpha = static_cast<double>(a);
  if (schedule.cap && alpha > *schedule.cap) alpha = *schedule.cap;
  return alpha;
}

}  // namespace pad
