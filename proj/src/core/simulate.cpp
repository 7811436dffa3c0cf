#include "gmdkit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gmdkit/estimators.hpp"
#include "gmdkit/linalg.hpp"
#include "gmdkit/parallel.hpp"
#include "gmdkit/structure_tests.hpp"

namespace gmdkit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Stream id for replicate-independent design randomness (perturbed setting).
constexpr std::uint64_t kDesignStream = 0xD351'6E00'0000'0001ULL;

Matrix lower_cholesky(const Matrix& k, const char* name) {
    const KernelFactor f = factor_kernel(k, name);
    return f.lower;
}

double sample_variance(const Vector& v) {
    if (v.size() < 2) return 0.0;
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

// Points in m dimensions with decaying coordinate scales; their Gram matrix
// has full rank and mean nonzero eigenvalue close to 1.
Matrix random_sq_distances(Index m, Rng& rng) {
    Vector scale(m);
    for (Index k = 0; k < m; ++k) scale(k) = 1.0 / static_cast<double>(k + 1);
    scale /= scale.sum();
    const Matrix z = standard_normal(m, m, rng) * scale.cwiseSqrt().asDiagonal();
    const Vector sq = z.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * z * z.transpose()).colwise() + sq;
    d2.rowwise() += sq.transpose();
    d2.diagonal().setZero();
    return d2.cwiseMax(0.0);
}

Vector top_eigvec_sum(const Matrix& q, const Vector& coefficients) {
    const SymmetricEigen eig = symmetric_eigen(q);
    if (coefficients.size() > eig.vectors.cols()) {
        fail(ErrorCode::invalid_argument, "more signal coefficients than eigenvectors");
    }
    return eig.vectors.leftCols(coefficients.size()) * coefficients;
}

}  // namespace

Matrix matrix_variate_normal(const Matrix& r, const Matrix& sigma, Rng& rng) {
    const Matrix a = lower_cholesky(r, "row covariance");
    const Matrix b = lower_cholesky(sigma, "column covariance");
    return a.triangularView<Eigen::Lower>() * standard_normal(r.rows(), sigma.rows(), rng) *
           b.triangularView<Eigen::Lower>().transpose();
}

Matrix matrix_variate_normal_precision(const Matrix& r_inv, const Matrix& sigma_inv, Rng& rng) {
    // With P = L L^T, L^{-T} z has covariance P^{-1}.
    Matrix x = standard_normal(r_inv.rows(), sigma_inv.rows(), rng);
    if (!r_inv.isIdentity(0.0)) {
        const Matrix lr = lower_cholesky(r_inv, "row precision");
        x = lr.triangularView<Eigen::Lower>().transpose().solve(x);
    }
    if (!sigma_inv.isIdentity(0.0)) {
        const Matrix ls = lower_cholesky(sigma_inv, "column precision");
        x = ls.triangularView<Eigen::Lower>().transpose().solve(x.transpose()).transpose();
    }
    return x;
}

Matrix block_ar_precision(Index m, Index split, double rho1, double rho2) {
    Matrix k = Matrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
            const double lag = static_cast<double>(std::abs(i - j));
            if (i == j) {
                k(i, j) = 1.0;
            } else if (i < split && j < split) {
                k(i, j) = std::pow(rho1, lag);
            } else if (i >= split && j >= split) {
                k(i, j) = std::pow(rho2, lag);
            }
        }
    }
    return k;
}

namespace {

// Fills pairs with (a - split)(b - split) < 0 in 1-based indexing.
void fill_cross_block(Matrix& k, Index split, double rho) {
    for (Index i = 0; i < k.rows(); ++i) {
        for (Index j = 0; j < k.cols(); ++j) {
            if ((i + 1 - split) * (j + 1 - split) < 0) k(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
        }
    }
}

Matrix partial_ar(Index m, Index block, double rho, double off) {
    Matrix k(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
            const Index lag = std::abs(i - j);
            if (i == j) {
                k(i, j) = 1.0;
            } else if (i < block && j < block) {
                k(i, j) = std::pow(rho, static_cast<double>(lag));
            } else {
                k(i, j) = (lag % 2 == 0 ? 1.0 : -1.0) * off;
            }
        }
    }
    return k;
}

}  // namespace

Matrix column_kernel(Index p, int variant) {
    const Index split = p / 2;
    switch (variant) {
        case 0:
            return block_ar_precision(p, split, 0.9, 0.5);
        case 1: {
            Matrix k = block_ar_precision(p, split, 0.9, 0.5);
            fill_cross_block(k, split, 0.1);
            return k;
        }
        case 2: {
            Matrix k = Matrix::Constant(p, p, 0.1);
            k.diagonal().array() += 0.9;
            return k;
        }
        default:
            fail(ErrorCode::invalid_argument, "unknown Q variant " + std::to_string(variant) + " (expected 0, 1, 2)");
    }
}

Matrix row_kernel(Index n, int variant) {
    const Index split = n / 2;
    switch (variant) {
        case 1:
            return block_ar_precision(n, split, 0.9, 0.5);
        case 2: {
            Matrix k = block_ar_precision(n, split, 0.9, 0.5);
            fill_cross_block(k, split, 0.1);
            return k;
        }
        case 3:
            return block_ar_precision(n, split, -0.4, -0.8);
        case 4:
            return partial_ar(n, split, 0.9, 0.002);
        case 5:
            return partial_ar(n, n / 10, 0.9, 0.005);
        case 6: {
            Matrix k(n, n);
            for (Index i = 0; i < n; ++i) {
                for (Index j = 0; j < n; ++j) k(i, j) = std::pow(-0.5, static_cast<double>(std::abs(i - j)));
            }
            return k;
        }
        default:
            fail(ErrorCode::invalid_argument, "unknown H variant " + std::to_string(variant) + " (expected 1..6)");
    }
}

Matrix truncated_precision(const Matrix& r, double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) fail(ErrorCode::invalid_argument, "theta must lie in (0, 1]");
    const SymmetricEigen eig = symmetric_eigen(r);
    if (!(eig.values(eig.values.size() - 1) > 0.0)) {
        fail(ErrorCode::not_positive_definite, "kernel not positive definite: R");
    }
    const double total = eig.values.sum();
    Index k = 0;
    double cum = 0.0;
    while (k < eig.values.size()) {
        cum += eig.values(k++);
        if (cum / total >= theta * (1.0 - 1e-12)) break;
    }
    const Matrix vk = eig.vectors.leftCols(k);
    Matrix h = vk * eig.values.head(k).cwiseInverse().asDiagonal() * vk.transpose();
    return 0.5 * (h + h.transpose());
}

Vector NoiseModel::sample(Rng& rng) const { return l_psi.transpose() * standard_normal(l_psi.rows(), rng); }

NoiseModel perturbed_noise(const Matrix& h, double delta) {
    if (!(delta >= 0.0)) fail(ErrorCode::invalid_argument, "delta must be nonnegative");
    const SymmetricEigen eig = symmetric_eigen(h);
    if (!(eig.values(eig.values.size() - 1) > 0.0)) {
        fail(ErrorCode::not_positive_definite, "kernel not positive definite: H");
    }
    const Vector lam = eig.values.cwiseInverse().array() + delta / eig.values(0);
    NoiseModel out;
    out.psi = eig.vectors * lam.asDiagonal() * eig.vectors.transpose();
    out.psi = 0.5 * (out.psi + out.psi.transpose());
    out.l_psi = eig.vectors * lam.cwiseSqrt().asDiagonal() * eig.vectors.transpose();
    out.l_psi = 0.5 * (out.l_psi + out.l_psi.transpose());
    return out;
}

Vector hard_threshold(const Vector& x, double threshold) {
    if (!(threshold >= 0.0)) fail(ErrorCode::invalid_argument, "threshold must be nonnegative");
    return (x.array().abs() > threshold).select(x, 0.0);
}

Vector eigvec_signal(const Matrix& q, const Vector& coefficients, double threshold) {
    return hard_threshold(top_eigvec_sum(q, coefficients), threshold);
}

std::string setting_name(Setting s) {
    switch (s) {
        case Setting::I: return "I";
        case Setting::II: return "II";
        case Setting::III: return "III";
        case Setting::IV: return "IV";
        case Setting::perturbed: return "perturbed";
    }
    return "?";
}

Setting parse_setting(const std::string& name) {
    for (Setting s : {Setting::I, Setting::II, Setting::III, Setting::IV, Setting::perturbed}) {
        if (setting_name(s) == name) return s;
    }
    fail(ErrorCode::invalid_argument, "unknown setting '" + name + "' (expected I, II, III, IV, perturbed)");
}

SettingDesign make_design(const SettingSpec& spec) {
    if (spec.n < 4 || spec.p < 4) fail(ErrorCode::invalid_argument, "settings need n >= 4 and p >= 4");
    if (spec.replicates < 1) fail(ErrorCode::invalid_argument, "replicates must be positive");
    SettingDesign d;
    d.spec = spec;
    const Index n = spec.n;
    const Index p = spec.p;

    if (spec.setting == Setting::perturbed) {
        Rng rng = make_rng(spec.seed, kDesignStream);
        d.h = kernel_from_sq_distance(random_sq_distances(n, rng));
        d.q = kernel_from_sq_distance(random_sq_distances(p, rng));
        d.x_row_precision = d.h;
        d.x_col_precision = d.q;
        d.clr_design = true;
        Vector coef(std::min<Index>(10, p));
        for (Index j = 0; j < coef.size(); ++j) coef(j) = 5.0 / std::sqrt(2.0 + 3.0 * static_cast<double>(j));
        d.beta_star = eigvec_signal(d.q, coef, 0.1);
        d.truth_mask.resize(static_cast<std::size_t>(p));
        for (Index j = 0; j < p; ++j) d.truth_mask[static_cast<std::size_t>(j)] = d.beta_star(j) != 0.0;
        d.noise = perturbed_noise(d.h, spec.delta);
        d.spec.signal_scale = spec.signal_scale.value_or(1.0);
        return d;
    }

    d.x_col_precision = column_kernel(p, 0);
    Vector coef(std::min<Index>(10, p));
    for (Index j = 0; j < coef.size(); ++j) coef(j) = 1.0 / std::sqrt(static_cast<double>(j + 1));
    d.beta_star = top_eigvec_sum(d.x_col_precision, coef);
    d.truth_mask.assign(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p / 2; ++j) d.truth_mask[static_cast<std::size_t>(j)] = true;

    switch (spec.setting) {
        case Setting::I:
        case Setting::II:
            if (!(spec.r_squared > 0.0 && spec.r_squared < 1.0)) {
                fail(ErrorCode::invalid_argument, "R^2 must lie in (0, 1)");
            }
            d.x_row_precision = Matrix::Identity(n, n);
            d.h = Matrix::Identity(n, n);
            d.q = spec.setting == Setting::I ? d.x_col_precision : column_kernel(p, spec.q_variant);
            d.spec.signal_scale = spec.signal_scale.value_or(1.0);
            break;
        case Setting::III:
        case Setting::IV: {
            d.x_row_precision = block_ar_precision(n, n / 2, 0.9, 0.5);
            const Matrix r = spd_inverse(d.x_row_precision, "row precision");
            NoiseModel noise;
            noise.psi = r;
            // R^{-1} = L L^T gives R = L^{-T} L^{-1}, so l_psi = L^{-1}.
            const Matrix l = lower_cholesky(d.x_row_precision, "row precision");
            noise.l_psi = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
            d.noise = noise;
            d.q = d.x_col_precision;
            if (spec.setting == Setting::III) {
                d.h = row_kernel(n, spec.h_variant);
                d.spec.signal_scale = spec.signal_scale.value_or(5.0);
            } else {
                d.h = truncated_precision(r, spec.theta);
                d.spec.signal_scale = spec.signal_scale.value_or(10.0);
            }
            break;
        }
        case Setting::perturbed:
            break;
    }
    return d;
}

SimulatedData simulate_replicate(const SettingDesign& design, int replicate) {
    const SettingSpec& spec = design.spec;
    Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(replicate));
    SimulatedData out;
    Matrix x = matrix_variate_normal_precision(design.x_row_precision, design.x_col_precision, rng);
    if (design.clr_design) {
        Matrix counts(x.rows(), x.cols());
        for (Index i = 0; i < x.rows(); ++i) {
            for (Index j = 0; j < x.cols(); ++j) {
                std::poisson_distribution<long> pois(20.0 * std::exp(x(i, j)));
                counts(i, j) = static_cast<double>(pois(rng));
            }
        }
        x = clr_transform(counts, 1.0);
    }
    const double scale = spec.signal_scale.value_or(1.0);
    out.beta_star = scale * design.beta_star;
    out.truth_mask = design.truth_mask;
    const Vector signal = x * out.beta_star;
    Vector noise;
    if (design.noise) {
        noise = design.noise->sample(rng);
        out.noise_scale = 1.0;
    } else {
        const double var_s = sample_variance(signal);
        out.noise_scale = var_s * (1.0 - spec.r_squared) / spec.r_squared;
        noise = std::sqrt(out.noise_scale) * standard_normal(x.rows(), rng);
    }
    const Vector y = signal + noise;
    const double var_y = sample_variance(y);
    out.realized_r2 = var_y > 0.0 ? sample_variance(signal) / var_y : 0.0;
    out.data.x = std::move(x);
    out.data.h = design.h;
    out.data.q = design.q;
    out.data.y = y;
    return out;
}

SimulatedData build_setting(const SettingSpec& spec, int replicate) {
    return simulate_replicate(make_design(spec), replicate);
}

std::string method_name(SimMethod m) {
    switch (m) {
        case SimMethod::gmdi_d: return "gmdi-d";
        case SimMethod::gmdi_k: return "gmdi-k";
        case SimMethod::r_gmdi_d: return "r-gmdi-d";
        case SimMethod::r_gmdi_k: return "r-gmdi-k";
        case SimMethod::krv_q: return "krv-q";
        case SimMethod::krv_h: return "krv-h";
        case SimMethod::mirkat_h: return "mirkat-h";
        case SimMethod::loocv_vi: return "loocv-vi";
        case SimMethod::loocv_top: return "loocv-top";
    }
    return "?";
}

SimMethod parse_method(const std::string& name) {
    for (SimMethod m : {SimMethod::gmdi_d, SimMethod::gmdi_k, SimMethod::r_gmdi_d, SimMethod::r_gmdi_k, SimMethod::krv_q,
                        SimMethod::krv_h, SimMethod::mirkat_h, SimMethod::loocv_vi, SimMethod::loocv_top}) {
        if (method_name(m) == name) return m;
    }
    fail(ErrorCode::invalid_argument, "unknown method '" + name + "'");
}

Summary summarize(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }), values.end());
    Summary s;
    if (values.empty()) return {kNaN, kNaN};
    std::sort(values.begin(), values.end());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        std::transform(values.begin(), values.end(), sq.begin(), [&](double v) { return (v - s.mean) * (v - s.mean); });
        std::sort(sq.begin(), sq.end());
        s.sd = std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(values.size() - 1));
    }
    return s;
}

const MethodResult& SimulationReport::result(SimMethod m) const {
    for (const MethodResult& r : methods) {
        if (r.method == m) return r;
    }
    fail(ErrorCode::invalid_argument, "method " + method_name(m) + " was not run");
}

double rejection_rate(const Vector& p_values, const std::vector<bool>& mask, bool nonzero, double alpha) {
    if (static_cast<std::size_t>(p_values.size()) != mask.size()) {
        fail(ErrorCode::dimension_mismatch, "p-value and truth-mask lengths differ");
    }
    std::size_t total = 0;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j] != nonzero) continue;
        ++total;
        if (p_values(static_cast<Index>(j)) < alpha) ++hits;
    }
    return total ? static_cast<double>(hits) / static_cast<double>(total) : kNaN;
}

SimulationReport run_experiment(const SettingSpec& spec, const std::vector<SimMethod>& methods,
                                const ExperimentOptions& options) {
    if (methods.empty()) fail(ErrorCode::invalid_argument, "no methods requested");
    const SettingDesign design = make_design(spec);
    const auto reps = static_cast<std::size_t>(spec.replicates);

    SimulationReport report;
    report.spec = design.spec;
    report.options = options;
    report.realized_r2.assign(reps, kNaN);
    for (SimMethod m : methods) {
        MethodResult r;
        r.method = m;
        r.type1.assign(reps, kNaN);
        r.power.assign(reps, kNaN);
        r.rmse.assign(reps, kNaN);
        r.p_value.assign(reps, kNaN);
        r.tau_hat.assign(reps, kNaN);
        report.methods.push_back(std::move(r));
    }

    const unsigned outer = resolve_threads(options.threads);
    const int inner = outer > 1 ? 1 : options.threads;
    parallel_for(reps, outer, [&](std::size_t rep) {
        try {
            const SimulatedData sim = simulate_replicate(design, static_cast<int>(rep));
            report.realized_r2[rep] = sim.realized_r2;
            PermutationOptions perm;
            perm.permutations = options.permutations;
            perm.seed = derive_seed(spec.seed ^ 0x5EEDULL, rep);
            perm.threads = inner;
            RobustOptions robust = options.robust;
            robust.threads = inner;

            for (MethodResult& res : report.methods) {
                auto record = [&](const InferenceReport& inf) {
                    res.type1[rep] = rejection_rate(inf.p_value, sim.truth_mask, false, options.alpha);
                    res.power[rep] = rejection_rate(inf.p_value, sim.truth_mask, true, options.alpha);
                };
                GmdiOptions g = options.gmdi;
                switch (res.method) {
                    case SimMethod::gmdi_d:
                    case SimMethod::gmdi_k:
                        g.estimator = res.method == SimMethod::gmdi_d ? Estimator::gmdr : Estimator::kpr;
                        record(run_gmdi(sim.data, g));
                        break;
                    case SimMethod::r_gmdi_d:
                    case SimMethod::r_gmdi_k: {
                        g.estimator = res.method == SimMethod::r_gmdi_d ? Estimator::gmdr : Estimator::kpr;
                        const RobustGmdiReport rr = run_robust_gmdi(sim.data, g, robust);
                        record(rr.report);
                        res.tau_hat[rep] = rr.weights.tau_hat;
                        break;
                    }
                    case SimMethod::krv_q:
                        res.p_value[rep] = krv(sim.data.x.transpose() * sim.data.x, sim.data.q, perm).p_value;
                        break;
                    case SimMethod::krv_h:
                        res.p_value[rep] = krv(sim.data.x * sim.data.x.transpose(), sim.data.h, perm).p_value;
                        break;
                    case SimMethod::mirkat_h:
                        res.p_value[rep] = mirkat(*sim.data.y, sim.data.h, perm).p_value;
                        break;
                    case SimMethod::loocv_vi:
                    case SimMethod::loocv_top: {
                        LoocvOptions lo;
                        lo.method = Method::gmdr;
                        lo.gmdr = options.gmdi.gmdr;
                        lo.gmdr.selector = res.method == SimMethod::loocv_vi ? Selector::vi : Selector::top;
                        lo.standardize = options.gmdi.standardize;
                        res.rmse[rep] = loocv_rmse(sim.data, lo).rmse;
                        break;
                    }
                }
            }
        } catch (const Error& e) {
            throw Error(e.code(), "replicate " + std::to_string(rep) + ": " + e.what());
        }
    });
    return report;
}

}  // namespace gmdkit
