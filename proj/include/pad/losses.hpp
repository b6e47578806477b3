#ifndef PAD_LOSSES_HPP_
#define PAD_LOSSES_HPP_

#include <Eigen/Core>
#include <optional>

#include "pad/error.hpp"

namespace pad {

using DVec = Eigen::VectorXd;
using DMat = Eigen::MatrixXd;

// Probabilities are clamped to [kProbEps, 1 - kProbEps] before taking logs so
// every loss stays finite at p in {0, 1}.
inline constexpr double kProbEps = 1e-7;

// Binary cross-entropy, mean over the batch. y entries are 0/1 labels and p
// the predicted attack probabilities.
double bce(const DVec& y, const DVec& p);

// Categorical cross-entropy, mean over rows. y rows are one-hot, p rows are
// probability vectors over the same classes.
double ce(const DMat& y_onehot, const DMat& p);

// Multi-task loss: bce + ce, unweighted.
double loss_multi(const DVec& y1, const DVec& p1, const DMat& y2, const DMat& p2);

// Squared error summed over the feature dimension, mean over rows.
double mse(const DMat& x, const DMat& y);

// Adversarial invariance loss: -mse(e1, e1_recon) - mse(e2, e2_recon), where
// e1_recon is the disentangler's reconstruction of e1 (same shape as e1) and
// e2_recon the reconstruction of e2. Always <= 0; the main model minimizes it,
// pushing the reconstructions to fail.
double loss_adv(const DMat& e1, const DMat& e2, const DMat& e1_recon, const DMat& e2_recon);

// Classification + reconstruction objectives for the adversarial assembly.
double loss_class_bc(const DVec& y, const DVec& p, const DMat& x, const DMat& x_recon,
                     double alpha);
double loss_class_mt(const DVec& y1, const DVec& p1, const DMat& y2, const DMat& p2,
                     const DMat& x, const DMat& x_recon, double alpha);

// Analytic gradients (same reduction conventions as the losses above).
DVec bce_grad_p(const DVec& y, const DVec& p);
DMat ce_grad_p(const DMat& y_onehot, const DMat& p);
DMat mse_grad_x(const DMat& x, const DMat& y);  // d mse / d x; d/dy is its negation

struct AdvGrads {
  DMat e1, e2, e1_recon, e2_recon;
};
AdvGrads loss_adv_grads(const DMat& e1, const DMat& e2, const DMat& e1_recon,
                        const DMat& e2_recon);

// Reconstruction weight schedule: alpha(epoch) = alpha0 + step * epoch,
// clamped at cap when set.
struct AlphaSchedule {
  double alpha0 = 0.025;
  double step = 0.025;
  std::optional<double> cap;
};

double alpha_at(const AlphaSchedule& schedule, int epoch);

}  // namespace pad

#endif  // PAD_LOSSES_HPP_
