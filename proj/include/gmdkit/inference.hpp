#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gmdkit/estimators.hpp"
#include "gmdkit/lasso.hpp"
#include "gmdkit/linalg.hpp"

namespace gmdkit {

// Eigenbasis of Q = D Delta D^T with Q rescaled to unit spectral norm, so
// delta_1 = 1 and the penalty levels below do not depend on the scale of Q.
SymmetricEigen normalized_q_eigen(const Matrix& q);

struct InitialEstimate {
    Vector beta_init;   // D beta_tilde
    Vector beta_tilde;  // rotated coordinates
    double lambda = 0.0;
    Matrix d;
    Vector delta;
    int sweeps = 0;
    double kkt_violation = 0.0;
};

// 2 sqrt(3 n log p).
double default_initial_lambda(Index n, Index p);

// min_b 1/2 ||y - X D b||_H^2 + lambda sum_j delta_j^{-1/2} |b_j|, solved on
// the whitened design L_H^T X D.
InitialEstimate initial_estimator(const TwoWayDataset& data, std::optional<double> lambda = std::nullopt,
                                  const LassoOptions& options = {});
InitialEstimate initial_estimator(const TwoWayDataset& data, const KernelFactor& h_factor,
                                  const SymmetricEigen& q_eigen, std::optional<double> lambda,
                                  const LassoOptions& options = {});

// Smallest lambda at which the rotated solution is identically zero.
double initial_lambda_max(const TwoWayDataset& data, const KernelFactor& h_factor,
                          const SymmetricEigen& q_eigen);

enum class Sigma2Mode {
    fixed_rate,  // lambda_o = log p / n
    cv_average,  // average of `repeats` fits, each with lambda_o picked by seeded k-fold CV
};

struct Sigma2Options {
    Sigma2Mode mode = Sigma2Mode::fixed_rate;
    std::optional<double> lambda;  // overrides the fixed rate
    int repeats = 100;
    int folds = 10;
    int grid_size = 20;
    std::uint64_t seed = 20232;
    LassoOptions lasso;
};

// Organic-lasso noise level: the attained minimum of
// (1/n) ||L_H^T y - Xc b||^2 + 2 lambda_o ||b||_1^2 with Xc = L_H^T X D Delta^{1/2}
// and its columns scaled to squared norm n.
double estimate_sigma2(const TwoWayDataset& data, const Sigma2Options& options = {});
double estimate_sigma2(const TwoWayDataset& data, const KernelFactor& h_factor,
                       const SymmetricEigen& q_eigen, const Sigma2Options& options = {});

// Xi = Q V W V^T.
Matrix xi_matrix(const Matrix& q, const GmdFactors& factors, const Vector& weights);

// beta_w_j - sum_{m != j} xi_jm b_m - h_j (xi_jj - 1) b_j with b = beta_init.
Vector bias_correct(const Vector& beta_w, const Matrix& xi, const Vector& beta_init, const Vector& h);

// sigma2 * diag(Q V W^2 S^{-2} V^T Q).
Vector variance_rjj(const Matrix& q, const GmdFactors& factors, const Vector& weights, double sigma2);

// Row-wise sup norm of (Xi - (1 - h_j) diag(Xi) - h_j I) D times (log p / n)^{1/2 - r}.
Vector psi_bound(const Matrix& xi, const Matrix& d, const Vector& h, double r, Index n);

// 2 (1 - Phi((|b| - psi)_+ / sqrt(r_jj))).
Vector p_values(const Vector& beta_corrected, const Vector& psi, const Vector& r_jj);

double normal_quantile(double prob);

// |(1 - h) xi_jj + h|^{-1} (2 psi + (q_{1 - alpha/2} + q_{1 - power/2}) sqrt(r_jj)).
double min_detectable_effect(double xi_jj, double h, double psi, double r_jj, double alpha, double power);

// Benjamini-Yekutieli adjusted p-values (valid under arbitrary dependence).
Vector by_qvalues(const Vector& p);

enum class Estimator { gmdr, kpr };

struct GmdiOptions {
    Estimator estimator = Estimator::gmdr;
    double h = 1.0;
    double r = 0.05;
    std::optional<double> lambda;
    bool standardize = true;
    GmdrOptions gmdr;
    KprOptions kpr;
    Sigma2Options sigma2;
    std::optional<double> sigma2_known;  // skips estimation, e.g. in oracle studies
    LassoOptions lasso;
    GmdAlgorithm algorithm = GmdAlgorithm::svd;
};

// Coefficients are on the centered, standardized scale; divide by `scales`
// for raw units (p-values are unchanged by that rescaling).
struct InferenceReport {
    Vector beta_w;
    Vector bias_hat;
    Vector beta_corrected;
    Vector psi;
    Vector r_jj;
    Vector p_value;
    Vector h;
    Vector xi_diag;
    Vector beta_init;
    Vector scales;
    double sigma2_hat = 0.0;
    double r = 0.0;
    double lambda = 0.0;
    Estimator estimator = Estimator::gmdr;
    WeightSpec weight;
    Index rank = 0;
};

InferenceReport run_gmdi(const TwoWayDataset& raw, const GmdiOptions& options = {});

}  // namespace gmdkit
