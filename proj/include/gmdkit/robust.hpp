#pragma once

#include "gmdkit/inference.hpp"
#include "gmdkit/linalg.hpp"

namespace gmdkit {

inline constexpr double kTauMin = 0.001;
inline constexpr double kTauMax = 0.999;
// Objective gap below which tau_hat snaps to kTauMax.
inline constexpr double kTauTieTolerance = 1e-6;

// Profile restricted likelihood of the mixed model
// y ~ N(mu 1, c_Q X Q X^T + c_H H(tau)^{-1}) with H normalized to unit
// spectral norm, H(tau) = tau H + (1 - tau) I and lambda = c_H / c_Q. Only the
// n - 1 contrasts free of the intercept enter, so
//   f(lambda, tau) = (n - 1) + (n - 1) log(y^T P y / (n - 1)) + log|M| + log(1^T M^{-1} 1),
//   M = X Q X^T + lambda H(tau)^{-1},
//   P = M^{-1} - M^{-1} 1 1^T M^{-1} / (1^T M^{-1} 1),
// at the optimal c_Q (the constant -log n is dropped). The plain likelihood of
// centered data is unbounded below once p >= n: centered X Q X^T is singular
// along a direction the centered y never visits, so log|M| -> -inf as
// lambda -> 0. Evaluations work in the eigenbasis of H, where H(tau)^{-1} is
// diagonal.
class RobustObjective {
public:
    // Any centering of x and y gives the same value.
    RobustObjective(const Matrix& x, const Matrix& h, const Matrix& q, const Vector& y);

    double operator()(double lambda, double tau) const;

    Index n() const { return y_rot_.size(); }
    double h_norm() const { return h_norm_; }

private:
    Matrix a_;         // E^T X Q X^T E
    Vector h_eig_;     // eigenvalues of H / ||H||_2
    Vector y_rot_;     // E^T y
    Vector one_rot_;   // E^T 1
    double h_norm_ = 1.0;
};

struct RobustOptions {
    int max_iterations = 200;
    int threads = 0;
};

struct RobustWeights {
    double tau_hat = 1.0;
    double lambda_hq_hat = 1.0;
    double neg_loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    double h_norm = 1.0;
};

// Quasi-Newton (BFGS, central-difference gradients) on (log lambda, t) with
// tau = kTauMin + (kTauMax - kTauMin) * logistic(t), started from the 3 x 4
// grid log lambda in {-4, 0, 4} x tau in {0.1, 0.5, 0.9, 0.99}. The best start wins,
// ties going to the lowest start index. If f(lambda_hat, kTauMax) is within
// kTauTieTolerance of the optimum, tau_hat = kTauMax.
RobustWeights estimate_tau(const TwoWayDataset& centered, const RobustOptions& options = {});

// ||H||_2 (tau H / ||H||_2 + (1 - tau) I). The rescaling keeps H(tau) on the
// scale of H so that tau = 1 returns H itself.
Matrix mixed_row_kernel(const Matrix& h, double tau);

struct RobustGmdiReport {
    RobustWeights weights;
    InferenceReport report;
};

// Centers under the original H, estimates tau, then runs GMDI with H(tau_hat).
RobustGmdiReport run_robust_gmdi(const TwoWayDataset& raw, const GmdiOptions& options = {},
                                 const RobustOptions& robust = {});

}  // namespace gmdkit
