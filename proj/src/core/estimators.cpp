#include "gmdkit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gmdkit/random.hpp"

namespace gmdkit {

namespace {

bool llt_well_posed(const Eigen::LLT<Matrix>& llt, const Matrix& m) {
    if (llt.info() != Eigen::Success) return false;
    const auto diag = llt.matrixLLT().diagonal();
    const double max_m = m.diagonal().cwiseAbs().maxCoeff();
    return max_m > 0.0 && diag.minCoeff() > 0.0 && diag.array().square().minCoeff() > 1e-12 * max_m;
}

std::vector<Index> to_indices(std::size_t begin, std::size_t end, const std::vector<Index>& order) {
    std::vector<Index> out(order.begin() + static_cast<std::ptrdiff_t>(begin),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

WeightSpec WeightSpec::index_set(const std::vector<Index>& selected, Index rank) {
    WeightSpec w;
    w.kind = WeightKind::index_set;
    w.weights = Vector::Zero(rank);
    for (Index j : selected) {
        if (j < 0 || j >= rank) {
            fail(ErrorCode::invalid_argument, "component index " + std::to_string(j + 1) +
                                                  " outside 1.." + std::to_string(rank));
        }
        w.weights(j) = 1.0;
    }
    w.selected = selected;
    return w;
}

WeightSpec WeightSpec::ridge(const Vector& sigma, double eta) {
    if (!(eta >= 0.0)) fail(ErrorCode::invalid_argument, "eta must be nonnegative");
    WeightSpec w;
    w.kind = WeightKind::ridge;
    w.eta = eta;
    const Vector s2 = sigma.array().square();
    w.weights = (s2.array() / (s2.array() + eta)).matrix();
    return w;
}

Vector fit_gamma(const GmdFactors& factors, const Matrix& h, const Vector& y) {
    if (y.size() != factors.u.rows() || h.rows() != y.size()) {
        fail(ErrorCode::dimension_mismatch, "fit_gamma: y has length " + std::to_string(y.size()) +
                                                ", expected " + std::to_string(factors.u.rows()));
    }
    return (factors.u.transpose() * (h * y)).cwiseQuotient(factors.s);
}

Vector vi_scores(const GmdFactors& factors, const Vector& gamma) {
    return (factors.s.array().square() * gamma.array().square()).matrix();
}

Vector membership_beta(const Matrix& q, const GmdFactors& factors, const Vector& weights,
                       const Vector& gamma) {
    return q * (factors.v * weights.cwiseProduct(gamma));
}

ComponentSelection select_components(const GmdFactors& factors, const Matrix& h, const Vector& y,
                                     double min_var_frac, Selector selector) {
    const Index rank = factors.rank();
    if (rank < 1) fail(ErrorCode::invalid_argument, "select_components needs at least one component");
    const Index n = y.size();
    const Vector gamma = fit_gamma(factors, h, y);
    const Vector vi = vi_scores(factors, gamma);
    const Vector s2 = factors.s.array().square();
    const double total = s2.sum();

    std::vector<Index> survivors;
    for (Index j = 0; j < rank; ++j) {
        if (s2(j) / total >= min_var_frac) survivors.push_back(j);
    }
    if (survivors.empty()) {
        fail(ErrorCode::invalid_argument, "no component explains at least min_var_frac of the variance");
    }
    if (selector == Selector::vi) {
        std::stable_sort(survivors.begin(), survivors.end(), [&](Index a, Index b) {
            if (vi(a) != vi(b)) return vi(a) > vi(b);
            if (factors.s(a) != factors.s(b)) return factors.s(a) > factors.s(b);
            return a < b;
        });
    }

    ComponentSelection out;
    out.order = survivors;
    const double total_ss = y.dot(h * y);
    const Index max_k = std::min<Index>(static_cast<Index>(survivors.size()), n - 1);
    double explained = 0.0;
    double best = 0.0;
    for (Index k = 1; k <= max_k; ++k) {
        explained += vi(survivors[static_cast<std::size_t>(k - 1)]);
        const double rss = std::max(total_ss - explained, 0.0);
        const double dof = static_cast<double>(n - k);
        const double gcv = rss / (dof * dof);
        out.gcv_path.push_back(gcv);
        if (k == 1 || gcv < best) {
            best = gcv;
            out.k_opt = k;
        }
    }
    if (max_k < 1) fail(ErrorCode::invalid_argument, "GCV needs n >= 2");
    out.selected.assign(survivors.begin(), survivors.begin() + out.k_opt);
    return out;
}

GmdEstimate fit_gmdr(const TwoWayDataset& data, std::shared_ptr<const GmdFactors> factors,
                     const GmdrOptions& options, ComponentSelection* selection) {
    const Vector& y = data.response();
    GmdEstimate est;
    est.factors = factors;
    est.gamma_hat = fit_gamma(*factors, data.h, y);
    est.vi_scores = vi_scores(*factors, est.gamma_hat);

    std::vector<Index> chosen;
    if (options.selected) {
        chosen = *options.selected;
    } else if (options.fixed_top_k) {
        const Index k = *options.fixed_top_k;
        if (k < 1 || k > factors->rank()) {
            fail(ErrorCode::invalid_argument, "fixed top-k " + std::to_string(k) + " outside 1.." +
                                                  std::to_string(factors->rank()));
        }
        chosen.resize(static_cast<std::size_t>(k));
        std::iota(chosen.begin(), chosen.end(), Index{0});
    } else {
        ComponentSelection sel =
            select_components(*factors, data.h, y, options.min_var_frac, options.selector);
        chosen = sel.selected;
        if (selection) *selection = std::move(sel);
    }
    est.weight = WeightSpec::index_set(chosen, factors->rank());
    est.beta = membership_beta(data.q, *factors, est.weight.weights, est.gamma_hat);
    est.fitted = data.x * est.beta;
    return est;
}

GmdEstimate fit_gmdr(const TwoWayDataset& data, const GmdrOptions& options) {
    return fit_gmdr(data, std::make_shared<const GmdFactors>(gmd(data)), options);
}

Vector kpr_dual_solve(const TwoWayDataset& data, double eta) {
    if (!(eta >= 0.0)) fail(ErrorCode::invalid_argument, "eta must be nonnegative");
    const Vector& y = data.response();
    const KernelFactor hf = factor_kernel(data.h, "H");
    const Matrix z = hf.lower.transpose() * data.x;  // L^T X
    const Vector b = hf.lower.transpose() * y;

    Matrix dual = z * data.q * z.transpose();
    dual.diagonal().array() += eta;
    Eigen::LLT<Matrix> llt(dual);
    if (llt_well_posed(llt, dual)) return data.q * (z.transpose() * llt.solve(b));

    if (eta == 0.0) {
        const Matrix primal = z.transpose() * z;  // X^T H X
        Eigen::LLT<Matrix> p_llt(primal);
        if (llt_well_posed(p_llt, primal)) return p_llt.solve(z.transpose() * b);
    }
    fail(ErrorCode::numerical, "singular KPR dual system at eta = " + std::to_string(eta) +
                                   "; use eta > 0");
}

KprCvResult kpr_cross_validate(const TwoWayDataset& data, const GmdFactors& factors,
                               const KprOptions& options) {
    const Vector& y = data.response();
    const Index n = data.n();
    if (options.folds < 2 || n < 2) fail(ErrorCode::invalid_argument, "KPR cross-validation needs folds >= 2 and n >= 2");
    const int folds = static_cast<int>(std::min<Index>(options.folds, n));
    if (options.grid_size < 1) fail(ErrorCode::invalid_argument, "grid_size must be positive");

    KprCvResult out;
    const double s1 = factors.s(0) * factors.s(0);
    const double lo = std::log(options.grid_low * s1);
    const double hi = std::log(options.grid_high * s1);
    for (int g = 0; g < options.grid_size; ++g) {
        const double t = options.grid_size == 1 ? 0.0 : static_cast<double>(g) / (options.grid_size - 1);
        out.grid.push_back(std::exp(lo + t * (hi - lo)));
    }
    out.cv_error.assign(out.grid.size(), 0.0);

    Rng rng = make_rng(options.seed, 0);
    const std::vector<Index> order = random_permutation(n, rng);
    const KernelFactor qf = factor_kernel(data.q, "Q");
    GmdOptions gopts;
    gopts.algorithm = GmdAlgorithm::gram;

    for (int f = 0; f < folds; ++f) {
        const auto begin = static_cast<std::size_t>(f * n / folds);
        const auto end = static_cast<std::size_t>((f + 1) * n / folds);
        const std::vector<Index> test = to_indices(begin, end, order);
        std::vector<Index> train;
        train.reserve(static_cast<std::size_t>(n) - test.size());
        for (Index i = 0, t = 0; i < n; ++i) {
            if (t < static_cast<Index>(test.size()) && test[static_cast<std::size_t>(t)] == i) {
                ++t;
                continue;
            }
            train.push_back(i);
        }

        const Matrix h_train = data.h(train, train);
        const Matrix x_train = data.x(train, Eigen::placeholders::all);
        const Vector y_train = y(train);
        const Vector x_mean = weighted_column_means(x_train, h_train);
        const double y_mean = weighted_mean(y_train, h_train);
        const Matrix xc = x_train.rowwise() - x_mean.transpose();
        const Vector yc = y_train.array() - y_mean;

        const GmdFactors fold = gmd(xc, factor_kernel(h_train, "H"), qf, data.q, gopts);
        const Vector gamma = fit_gamma(fold, h_train, yc);
        const Matrix x_test = data.x(test, Eigen::placeholders::all).rowwise() - x_mean.transpose();
        const Matrix proj = x_test * (data.q * fold.v);
        const Vector y_test = y(test).array() - y_mean;
        const Matrix h_test = data.h(test, test);

        for (std::size_t g = 0; g < out.grid.size(); ++g) {
            const WeightSpec w = WeightSpec::ridge(fold.s, out.grid[g]);
            const Vector resid = y_test - proj * w.weights.cwiseProduct(gamma);
            out.cv_error[g] += resid.dot(h_test * resid);
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < out.grid.size(); ++g) {
        if (out.cv_error[g] < out.cv_error[best]) best = g;
    }
    out.eta = out.grid[best];
    return out;
}

GmdEstimate fit_kpr(const TwoWayDataset& data, std::shared_ptr<const GmdFactors> factors,
                    const KprOptions& options, KprCvResult* cv) {
    double eta = 0.0;
    if (options.eta) {
        eta = *options.eta;
        if (!(eta >= 0.0)) fail(ErrorCode::invalid_argument, "eta must be nonnegative");
    } else {
        KprCvResult res = kpr_cross_validate(data, *factors, options);
        eta = res.eta;
        if (cv) *cv = std::move(res);
    }
    GmdEstimate est;
    est.factors = factors;
    est.gamma_hat = fit_gamma(*factors, data.h, data.response());
    est.vi_scores = vi_scores(*factors, est.gamma_hat);
    est.weight = WeightSpec::ridge(factors->s, eta);
    est.beta = kpr_dual_solve(data, eta);
    est.fitted = data.x * est.beta;
    return est;
}

GmdEstimate fit_kpr(const TwoWayDataset& data, const KprOptions& options) {
    return fit_kpr(data, std::make_shared<const GmdFactors>(gmd(data)), options);
}

PreparedData prepare(const TwoWayDataset& raw, bool standardize) {
    PreparedData out;
    out.x_shift = weighted_column_means(raw.x, raw.h);
    out.y_shift = raw.y ? weighted_mean(*raw.y, raw.h) : 0.0;
    out.data = center_hq(raw);
    if (standardize) {
        Standardization st = standardize_columns(out.data);
        out.data = std::move(st.data);
        out.scales = std::move(st.scales);
    } else {
        out.scales = Vector::Ones(raw.p());
    }
    return out;
}

Vector predict(const PreparedData& prepared, const Vector& beta, const Matrix& raw_rows) {
    const Matrix centered = raw_rows.rowwise() - prepared.x_shift.transpose();
    return (centered * beta.cwiseQuotient(prepared.scales)).array() + prepared.y_shift;
}

LoocvResult loocv_rmse(const TwoWayDataset& raw, const LoocvOptions& options) {
    const Vector& y = raw.response();
    const Index n = raw.n();
    if (n < 3) fail(ErrorCode::invalid_argument, "LOOCV needs n >= 3");
    const double denom = y.squaredNorm();
    if (!(denom > 0.0)) fail(ErrorCode::invalid_argument, "zero response norm");

    GmdOptions gopts;
    gopts.algorithm = options.algorithm;
    const KernelFactor qf = factor_kernel(raw.q, "Q");
    LoocvResult out;
    out.predictions.resize(n);
    for (Index i = 0; i < n; ++i) {
        TwoWayDataset train;
        train.x = drop_index(raw.x, i, true, false);
        train.h = drop_index(raw.h, i, true, true);
        train.q = raw.q;
        train.y = drop_index(y, i);
        const PreparedData prep = prepare(train, options.standardize);
        auto factors = std::make_shared<const GmdFactors>(
            gmd(prep.data.x, factor_kernel(prep.data.h, "H"), qf, prep.data.q, gopts));
        GmdEstimate est = options.method == Method::gmdr ? fit_gmdr(prep.data, factors, options.gmdr)
                                                         : fit_kpr(prep.data, factors, options.kpr);
        out.predictions(i) = predict(prep, est.beta, raw.x.row(i))(0);
    }
    out.rmse = (y - out.predictions).squaredNorm() / denom;
    return out;
}

}  // namespace gmdkit
