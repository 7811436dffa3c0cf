#include "gmdkit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "gmdkit/random.hpp"

namespace gmdkit {

namespace {

struct WhitenedProblem {
    Matrix z;  // L_H^T X D
    Vector y;  // L_H^T y
};

WhitenedProblem whiten(const TwoWayDataset& data, const KernelFactor& hf, const Matrix& d) {
    if (hf.dim() != data.n()) {
        fail(ErrorCode::dimension_mismatch, "H factor is " + shape_string(hf.dim(), hf.dim()) +
                                                " but X has " + std::to_string(data.n()) + " rows");
    }
    const auto lt = hf.lower.triangularView<Eigen::Lower>().transpose();
    WhitenedProblem w;
    w.z = lt * (data.x * d);
    w.y = lt * data.response();
    return w;
}

double organic_rate(Index n, Index p) {
    return std::log(static_cast<double>(p)) / static_cast<double>(n);
}

// Picks lambda_o by k-fold CV over a log grid around the fixed rate, then
// returns the full-data minimum at the chosen value.
double organic_cv_fit(const Matrix& xc, const Vector& yw, const Sigma2Options& options, std::uint64_t stream) {
    const Index n = xc.rows();
    const int folds = std::clamp<int>(options.folds, 2, static_cast<int>(n));
    const double base = organic_rate(n, xc.cols());
    std::vector<double> grid(static_cast<std::size_t>(options.grid_size));
    for (int g = 0; g < options.grid_size; ++g) {
        const double t = options.grid_size == 1 ? 0.0 : -1.5 + 3.0 * g / (options.grid_size - 1);
        grid[g] = base * std::pow(10.0, t);
    }
    Rng rng = make_rng(options.seed, stream);
    const std::vector<Index> perm = random_permutation(n, rng);
    std::vector<double> err(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds;
        const Index hi = n * (f + 1) / folds;
        Matrix xt(n - (hi - lo), xc.cols());
        Vector yt(n - (hi - lo));
        Matrix xv(hi - lo, xc.cols());
        Vector yv(hi - lo);
        Index a = 0;
        Index b = 0;
        for (Index i = 0; i < n; ++i) {
            const Index row = perm[static_cast<std::size_t>(i)];
            if (i >= lo && i < hi) {
                xv.row(b) = xc.row(row);
                yv(b++) = yw(row);
            } else {
                xt.row(a) = xc.row(row);
                yt(a++) = yw(row);
            }
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const LassoResult fit = organic_lasso(xt, yt, grid[g], options.lasso);
            err[g] += (yv - xv * fit.coef).squaredNorm();
        }
    }
    const auto best = std::min_element(err.begin(), err.end()) - err.begin();
    return organic_lasso(xc, yw, grid[static_cast<std::size_t>(best)], options.lasso).objective;
}

}  // namespace

SymmetricEigen normalized_q_eigen(const Matrix& q) {
    SymmetricEigen eig = symmetric_eigen(q);
    if (eig.values.size() == 0 || !(eig.values(eig.values.size() - 1) > 0.0)) {
        fail(ErrorCode::not_positive_definite, "kernel not positive definite: Q has eigenvalue " +
                                                   std::to_string(eig.values.size() ? eig.values.minCoeff() : 0.0));
    }
    eig.values /= eig.values(0);
    return eig;
}

double default_initial_lambda(Index n, Index p) {
    return 2.0 * std::sqrt(3.0 * static_cast<double>(n) * std::log(static_cast<double>(p)));
}

InitialEstimate initial_estimator(const TwoWayDataset& data, std::optional<double> lambda,
                                  const LassoOptions& options) {
    return initial_estimator(data, factor_kernel(data.h, "H"), normalized_q_eigen(data.q), lambda, options);
}

InitialEstimate initial_estimator(const TwoWayDataset& data, const KernelFactor& h_factor,
                                  const SymmetricEigen& q_eigen, std::optional<double> lambda,
                                  const LassoOptions& options) {
    const double lam = lambda.value_or(default_initial_lambda(data.n(), data.p()));
    if (!(lam >= 0.0) || !std::isfinite(lam)) fail(ErrorCode::invalid_argument, "lambda must be a nonnegative number");
    const WhitenedProblem w = whiten(data, h_factor, q_eigen.vectors);
    const Vector penalty = lam * q_eigen.values.cwiseSqrt().cwiseInverse();
    const LassoResult fit = weighted_lasso(w.z, w.y, penalty, options);

    InitialEstimate out;
    out.beta_tilde = fit.coef;
    out.beta_init = q_eigen.vectors * fit.coef;
    out.lambda = lam;
    out.d = q_eigen.vectors;
    out.delta = q_eigen.values;
    out.sweeps = fit.sweeps;
    out.kkt_violation = lasso_kkt_violation(w.z, w.y, penalty, fit.coef);
    return out;
}

double initial_lambda_max(const TwoWayDataset& data, const KernelFactor& h_factor, const SymmetricEigen& q_eigen) {
    const WhitenedProblem w = whiten(data, h_factor, q_eigen.vectors);
    return (q_eigen.values.cwiseSqrt().array() * (w.z.transpose() * w.y).array().abs()).maxCoeff();
}

double estimate_sigma2(const TwoWayDataset& data, const Sigma2Options& options) {
    return estimate_sigma2(data, factor_kernel(data.h, "H"), normalized_q_eigen(data.q), options);
}

double estimate_sigma2(const TwoWayDataset& data, const KernelFactor& h_factor, const SymmetricEigen& q_eigen,
                       const Sigma2Options& options) {
    const WhitenedProblem w = whiten(data, h_factor, q_eigen.vectors);
    if (!(w.y.squaredNorm() > 0.0)) fail(ErrorCode::numerical, "degenerate noise: response is zero");
    // The log p / n rate presumes columns with squared norm n, so the design is
    // put on that scale before fitting.
    Matrix xc = w.z * q_eigen.values.cwiseSqrt().asDiagonal();
    const double root_n = std::sqrt(static_cast<double>(data.n()));
    for (Index j = 0; j < xc.cols(); ++j) {
        const double norm = xc.col(j).norm();
        if (norm > 0.0) xc.col(j) *= root_n / norm;
    }

    double sigma2 = 0.0;
    if (options.mode == Sigma2Mode::fixed_rate) {
        const double lam = options.lambda.value_or(organic_rate(data.n(), data.p()));
        sigma2 = organic_lasso(xc, w.y, lam, options.lasso).objective;
    } else {
        if (options.repeats < 1) fail(ErrorCode::invalid_argument, "sigma2 CV needs at least one repeat");
        std::vector<double> fits(static_cast<std::size_t>(options.repeats));
        for (int rep = 0; rep < options.repeats; ++rep) {
            fits[static_cast<std::size_t>(rep)] = organic_cv_fit(xc, w.y, options, static_cast<std::uint64_t>(rep));
        }
        std::sort(fits.begin(), fits.end());
        sigma2 = std::accumulate(fits.begin(), fits.end(), 0.0) / static_cast<double>(fits.size());
    }
    if (!(sigma2 > 0.0)) fail(ErrorCode::numerical, "degenerate noise: estimated variance is zero");
    return sigma2;
}

Matrix xi_matrix(const Matrix& q, const GmdFactors& factors, const Vector& weights) {
    if (weights.size() != factors.rank()) {
        fail(ErrorCode::dimension_mismatch, "weight length " + std::to_string(weights.size()) +
                                                " does not match rank " + std::to_string(factors.rank()));
    }
    const Matrix qv = q * factors.v;
    return qv * weights.asDiagonal() * factors.v.transpose();
}

Vector bias_correct(const Vector& beta_w, const Matrix& xi, const Vector& beta_init, const Vector& h) {
    const Index p = beta_w.size();
    if (xi.rows() != p || xi.cols() != p || beta_init.size() != p || h.size() != p) {
        fail(ErrorCode::dimension_mismatch, "bias_correct: inconsistent lengths");
    }
    const Vector diag = xi.diagonal();
    const Vector offdiag = xi * beta_init - diag.cwiseProduct(beta_init);
    const Vector own = h.cwiseProduct((diag.array() - 1.0).matrix()).cwiseProduct(beta_init);
    return beta_w - offdiag - own;
}

Vector variance_rjj(const Matrix& q, const GmdFactors& factors, const Vector& weights, double sigma2) {
    if (!(sigma2 > 0.0)) fail(ErrorCode::invalid_argument, "sigma2 must be positive");
    if (weights.size() != factors.rank()) {
        fail(ErrorCode::dimension_mismatch, "weight length does not match rank");
    }
    if (!(weights.array() > 0.0).any()) fail(ErrorCode::invalid_argument, "empty weight");
    const Matrix a = (q * factors.v) * weights.cwiseQuotient(factors.s).asDiagonal();
    return sigma2 * a.rowwise().squaredNorm();
}

Vector psi_bound(const Matrix& xi, const Matrix& d, const Vector& h, double r, Index n) {
    if (!(r > 0.0 && r < 0.5)) fail(ErrorCode::invalid_argument, "r must lie in (0, 1/2)");
    const Index p = xi.rows();
    if (xi.cols() != p || d.rows() != p || h.size() != p) {
        fail(ErrorCode::dimension_mismatch, "psi_bound: inconsistent shapes");
    }
    Matrix b = xi;
    for (Index j = 0; j < p; ++j) b(j, j) = h(j) * (xi(j, j) - 1.0);
    const double rate = std::pow(std::log(static_cast<double>(p)) / static_cast<double>(n), 0.5 - r);
    return (b * d).cwiseAbs().rowwise().maxCoeff() * rate;
}

Vector p_values(const Vector& beta_corrected, const Vector& psi, const Vector& r_jj) {
    const Index p = beta_corrected.size();
    if (psi.size() != p || r_jj.size() != p) fail(ErrorCode::dimension_mismatch, "p_values: inconsistent lengths");
    Vector out(p);
    for (Index j = 0; j < p; ++j) {
        const double excess = std::max(std::abs(beta_corrected(j)) - psi(j), 0.0);
        if (excess == 0.0) {
            out(j) = 1.0;
        } else if (!(r_jj(j) > 0.0)) {
            out(j) = 0.0;
        } else {
            out(j) = std::erfc(excess / std::sqrt(r_jj(j)) / std::sqrt(2.0));
        }
    }
    return out;
}

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0)) fail(ErrorCode::invalid_argument, "quantile probability must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

double min_detectable_effect(double xi_jj, double h, double psi, double r_jj, double alpha, double power) {
    const double denom = std::abs((1.0 - h) * xi_jj + h);
    if (!(denom > 1e-12)) {
        fail(ErrorCode::invalid_argument, "xi_jj is zero with h = 0; the power bound needs h = 1");
    }
    const double z = normal_quantile(1.0 - alpha / 2.0) + normal_quantile(1.0 - power / 2.0);
    return (2.0 * psi + z * std::sqrt(r_jj)) / denom;
}

Vector by_qvalues(const Vector& p) {
    const Index m = p.size();
    Vector q(m);
    if (m == 0) return q;
    double harmonic = 0.0;
    for (Index i = 1; i <= m; ++i) harmonic += 1.0 / static_cast<double>(i);
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return p(a) < p(b); });
    double running = 1.0;
    for (Index k = m; k >= 1; --k) {
        const Index j = order[static_cast<std::size_t>(k - 1)];
        running = std::min(running, p(j) * static_cast<double>(m) * harmonic / static_cast<double>(k));
        q(j) = std::min(running, 1.0);
    }
    return q;
}

InferenceReport run_gmdi(const TwoWayDataset& raw, const GmdiOptions& options) {
    validate_dataset(raw);
    raw.response();
    if (!(options.h >= 0.0 && options.h <= 1.0)) fail(ErrorCode::invalid_argument, "h must lie in [0, 1]");
    if (!(options.r > 0.0 && options.r < 0.5)) fail(ErrorCode::invalid_argument, "r must lie in (0, 1/2)");

    const PreparedData prep = prepare(raw, options.standardize);
    const TwoWayDataset& data = prep.data;
    const KernelFactor hf = factor_kernel(data.h, "H");
    GmdOptions gopts;
    gopts.algorithm = options.algorithm;
    auto factors = std::make_shared<const GmdFactors>(gmd(data.x, hf, factor_kernel(data.q, "Q"), data.q, gopts));

    const GmdEstimate est = options.estimator == Estimator::gmdr ? fit_gmdr(data, factors, options.gmdr)
                                                                 : fit_kpr(data, factors, options.kpr);
    const SymmetricEigen qe = normalized_q_eigen(data.q);
    const InitialEstimate init = initial_estimator(data, hf, qe, options.lambda, options.lasso);
    const double sigma2 = options.sigma2_known ? *options.sigma2_known : estimate_sigma2(data, hf, qe, options.sigma2);

    InferenceReport rep;
    const Index p = data.p();
    const Matrix xi = xi_matrix(data.q, *factors, est.weight.weights);
    rep.h = Vector::Constant(p, options.h);
    rep.beta_w = est.beta;
    rep.beta_corrected = bias_correct(est.beta, xi, init.beta_init, rep.h);
    rep.bias_hat = rep.beta_w - rep.beta_corrected;
    rep.r_jj = variance_rjj(data.q, *factors, est.weight.weights, sigma2);
    rep.psi = psi_bound(xi, qe.vectors, rep.h, options.r, data.n());
    rep.p_value = p_values(rep.beta_corrected, rep.psi, rep.r_jj);
    rep.xi_diag = xi.diagonal();
    rep.beta_init = init.beta_init;
    rep.scales = prep.scales;
    rep.sigma2_hat = sigma2;
    rep.r = options.r;
    rep.lambda = init.lambda;
    rep.estimator = options.estimator;
    rep.weight = est.weight;
    rep.rank = factors->rank();
    return rep;
}

}  // namespace gmdkit
