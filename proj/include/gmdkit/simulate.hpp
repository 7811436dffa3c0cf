#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmdkit/inference.hpp"
#include "gmdkit/random.hpp"
#include "gmdkit/robust.hpp"

namespace gmdkit {

// X = A Z B^T with A A^T = R and B B^T = Sigma, so Cov(vec X) = Sigma (x) R.
Matrix matrix_variate_normal(const Matrix& r, const Matrix& sigma, Rng& rng);
// Same distribution parametrized by the precisions R^{-1} and Sigma^{-1}.
Matrix matrix_variate_normal_precision(const Matrix& r_inv, const Matrix& sigma_inv, Rng& rng);

// Block AR precision: 1 on the diagonal, rho1^{|i-j|} inside the first
// `split` indices, rho2^{|i-j|} inside the rest, 0 across blocks.
Matrix block_ar_precision(Index m, Index split, double rho1, double rho2);

// Column kernels. Variant 0 is the true Sigma^{-1}; variant 1 puts
// 0.1^{|i-j|} on cross-block pairs (a - split)(b - split) < 0 (1-based);
// variant 2 is 0.9 I + 0.1 11^T.
Matrix column_kernel(Index p, int variant);

// Row kernels H^(1)..H^(6) for the correlated-sample design on n rows.
Matrix row_kernel(Index n, int variant);

// Keeps the top-k(theta) eigenpairs of R with inverted eigenvalues, where
// k(theta) is the smallest k whose eigenvalue mass ratio reaches theta.
Matrix truncated_precision(const Matrix& r, double theta);

struct NoiseModel {
    Matrix psi;
    Matrix l_psi;  // l_psi^T l_psi = psi

    Vector sample(Rng& rng) const;
};

// Psi = sum_j (1/lambda_j + delta/lambda_1) d_j d_j^T from H's eigenpairs, so
// that ||L_psi H L_psi^T - I||_2 = delta.
NoiseModel perturbed_noise(const Matrix& h, double delta);

// x 1(|x| > threshold) elementwise.
Vector hard_threshold(const Vector& x, double threshold);

// s(sum_j c_j d_j, threshold) over the top eigenvectors d_j of Q.
Vector eigvec_signal(const Matrix& q, const Vector& coefficients, double threshold);

enum class Setting { I, II, III, IV, perturbed };

std::string setting_name(Setting s);
Setting parse_setting(const std::string& name);

struct SettingSpec {
    Setting setting = Setting::I;
    Index n = 200;
    Index p = 300;
    double r_squared = 0.8;              // I, II
    int q_variant = 1;                   // II: 1 or 2
    int h_variant = 1;                   // III: 1..6
    double theta = 1.0;                  // IV
    double delta = 0.5;                  // perturbed
    std::optional<double> signal_scale;  // III: 5, IV: 10, perturbed: 1
    int replicates = 100;
    std::uint64_t seed = 7;
};

struct SimulatedData {
    TwoWayDataset data;
    Vector beta_star;
    std::vector<bool> truth_mask;  // true where beta_star is nonzero by design
    double noise_scale = 0.0;      // sigma_eps^2 for I/II, 1 otherwise
    double realized_r2 = 0.0;      // empirical Var(signal) / Var(y)
};

// Fixed (replicate-independent) parts of a setting: kernels and beta_star.
struct SettingDesign {
    SettingSpec spec;
    Matrix x_row_precision;   // R^{-1} (identity for I/II)
    Matrix x_col_precision;   // Sigma^{-1}
    Matrix h;
    Matrix q;
    Vector beta_star;
    std::vector<bool> truth_mask;
    std::optional<NoiseModel> noise;  // correlated noise (III, IV, perturbed)
    bool clr_design = false;
};

SettingDesign make_design(const SettingSpec& spec);
SimulatedData simulate_replicate(const SettingDesign& design, int replicate);
SimulatedData build_setting(const SettingSpec& spec, int replicate = 0);

enum class SimMethod { gmdi_d, gmdi_k, r_gmdi_d, r_gmdi_k, krv_q, krv_h, mirkat_h, loocv_vi, loocv_top };

std::string method_name(SimMethod m);
SimMethod parse_method(const std::string& name);

// The simulated kernels are defined on the generating scale of X, so the
// harness leaves columns unstandardized by default.
inline GmdiOptions raw_scale_gmdi_options() {
    GmdiOptions g;
    g.standardize = false;
    return g;
}

struct ExperimentOptions {
    double alpha = 0.05;         // inference level
    double screen_alpha = 0.05;  // KRV / MiRKAT level
    int permutations = 999;
    GmdiOptions gmdi = raw_scale_gmdi_options();
    RobustOptions robust;
    int threads = 0;
};

struct Summary {
    double mean = 0.0;
    double sd = 0.0;
};

// Order-independent: values are sorted before summation.
Summary summarize(std::vector<double> values);

struct MethodResult {
    SimMethod method;
    // Per replicate; only the fields that apply to the method are filled.
    std::vector<double> type1;
    std::vector<double> power;
    std::vector<double> rmse;
    std::vector<double> p_value;
    std::vector<double> tau_hat;
};

struct SimulationReport {
    SettingSpec spec;
    ExperimentOptions options;
    std::vector<MethodResult> methods;
    std::vector<double> realized_r2;

    const MethodResult& result(SimMethod m) const;
};

// Type-I error: share of true-zero coordinates with p < alpha; power: share
// of nonzero coordinates with p < alpha.
double rejection_rate(const Vector& p_values, const std::vector<bool>& mask, bool nonzero, double alpha);

SimulationReport run_experiment(const SettingSpec& spec, const std::vector<SimMethod>& methods,
                                const ExperimentOptions& options = {});

}  // namespace gmdkit
