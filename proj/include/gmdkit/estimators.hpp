#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "gmdkit/linalg.hpp"

namespace gmdkit {

enum class WeightKind { index_set, ridge };

// Diagonal weight matrix W selecting a member beta^w = Q V W S^{-1} U^T H y
// of the GMD estimator family.
struct WeightSpec {
    WeightKind kind = WeightKind::index_set;
    Vector weights;                // length K, nonnegative
    std::vector<Index> selected;   // index_set only, 0-based component ids
    std::optional<double> eta;     // ridge only

    static WeightSpec index_set(const std::vector<Index>& selected, Index rank);
    // w_j = sigma_j^2 / (sigma_j^2 + eta)
    static WeightSpec ridge(const Vector& sigma, double eta);
};

struct GmdEstimate {
    Vector beta;
    WeightSpec weight;
    std::shared_ptr<const GmdFactors> factors;
    Vector gamma_hat;
    Vector vi_scores;
    Vector fitted;  // X beta
};

// gamma_l = sigma_l^{-1} u_l^T H y, the H-weighted regression of y on all
// components nu_l = u_l sigma_l.
Vector fit_gamma(const GmdFactors& factors, const Matrix& h, const Vector& y);

// VI_j = sigma_j^2 gamma_j^2.
Vector vi_scores(const GmdFactors& factors, const Vector& gamma);

// Q V diag(weights) gamma, i.e. Q V W S^{-1} U^T H y when gamma = fit_gamma(...).
Vector membership_beta(const Matrix& q, const GmdFactors& factors, const Vector& weights,
                       const Vector& gamma);

enum class Selector {
    vi,   // components ordered by VI score
    top,  // components ordered by GMD value (classical PCR-style)
};

struct ComponentSelection {
    std::vector<Index> selected;   // the chosen index set, in path order
    std::vector<Index> order;      // path order over surviving components
    std::vector<double> gcv_path;  // GCV(k) for k = 1..order.size()
    Index k_opt = 0;
};

// Drops components explaining less than `min_var_frac` of sum sigma^2,
// orders the rest (VI nonincreasing, ties by larger sigma then lower index;
// or by sigma for Selector::top), and picks the prefix minimizing
// GCV(k) = ||(I - G(k)) y||_H^2 / (n - k)^2, smallest k on ties.
ComponentSelection select_components(const GmdFactors& factors, const Matrix& h, const Vector& y,
                                     double min_var_frac = 1e-3, Selector selector = Selector::vi);

struct GmdrOptions {
    double min_var_frac = 1e-3;
    Selector selector = Selector::vi;
    std::optional<std::vector<Index>> selected;  // explicit index set, skips selection
    std::optional<Index> fixed_top_k;            // deterministic W: top-k by sigma
};

// Expects centered (and usually standardized) data with a response.
GmdEstimate fit_gmdr(const TwoWayDataset& data, std::shared_ptr<const GmdFactors> factors,
                     const GmdrOptions& options = {}, ComponentSelection* selection = nullptr);
GmdEstimate fit_gmdr(const TwoWayDataset& data, const GmdrOptions& options = {});

struct KprOptions {
    std::optional<double> eta;  // absent: choose by k-fold CV
    int folds = 10;  // capped at n
    int grid_size = 50;
    double grid_low = 1e-4;   // multiples of sigma_1^2
    double grid_high = 1e2;
    std::uint64_t seed = 20231;
};

struct KprCvResult {
    std::vector<double> grid;
    std::vector<double> cv_error;
    double eta = 0.0;
};

// beta = Q X^T (X Q X^T + eta H^{-1})^{-1} y, evaluated in whitened form.
// At eta = 0 with a singular dual system the primal normal equations are used
// when X^T H X is nonsingular; otherwise the problem is ill-posed and an
// error suggesting eta > 0 is raised.
Vector kpr_dual_solve(const TwoWayDataset& data, double eta);

KprCvResult kpr_cross_validate(const TwoWayDataset& data, const GmdFactors& factors,
                               const KprOptions& options);

GmdEstimate fit_kpr(const TwoWayDataset& data, std::shared_ptr<const GmdFactors> factors,
                    const KprOptions& options = {}, KprCvResult* cv = nullptr);
GmdEstimate fit_kpr(const TwoWayDataset& data, const KprOptions& options = {});

// Raw data -> H-centered, optionally standardized data, with the shifts and
// scales needed to predict for new rows.
struct PreparedData {
    TwoWayDataset data;
    Vector x_shift;
    double y_shift = 0.0;
    Vector scales;  // all ones when not standardized
};

PreparedData prepare(const TwoWayDataset& raw, bool standardize);

// Predicts raw-scale responses for raw rows.
Vector predict(const PreparedData& prepared, const Vector& beta, const Matrix& raw_rows);

enum class Method { gmdr, kpr };

struct LoocvOptions {
    Method method = Method::gmdr;
    GmdrOptions gmdr;
    KprOptions kpr;
    bool standardize = true;
    GmdAlgorithm algorithm = GmdAlgorithm::gram;
};

struct LoocvResult {
    double rmse = 0.0;
    Vector predictions;
};

// Leave-one-out predictions refit without sample i (H restricted to the
// remaining rows and columns); RMSE = ||y - y_hat||^2 / ||y||^2.
LoocvResult loocv_rmse(const TwoWayDataset& raw, const LoocvOptions& options = {});

}  // namespace gmdkit
