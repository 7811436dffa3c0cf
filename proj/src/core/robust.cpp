#include "gmdkit/robust.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gmdkit/parallel.hpp"

namespace gmdkit {

namespace {

constexpr double kLogLambdaBound = 30.0;
constexpr double kLogitBound = 30.0;

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double tau_of(double t) { return kTauMin + (kTauMax - kTauMin) * logistic(t); }

double t_of(double tau) {
    const double s = (tau - kTauMin) / (kTauMax - kTauMin);
    return std::log(s / (1.0 - s));
}

using Point = std::array<double, 2>;

struct Search {
    Point x{};
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

Point clamp(Point x) {
    x[0] = std::clamp(x[0], -kLogLambdaBound, kLogLambdaBound);
    x[1] = std::clamp(x[1], -kLogitBound, kLogitBound);
    return x;
}

template <typename F>
Point gradient(const F& f, const Point& x) {
    constexpr double step = 1e-5;
    Point g{};
    for (int k = 0; k < 2; ++k) {
        Point hi = x;
        Point lo = x;
        hi[k] += step;
        lo[k] -= step;
        g[k] = (f(clamp(hi)) - f(clamp(lo))) / (2.0 * step);
    }
    return g;
}

template <typename F>
Search bfgs(const F& f, Point x0, int max_iterations) {
    Search s;
    s.x = clamp(x0);
    s.f = f(s.x);
    Eigen::Matrix2d hinv = Eigen::Matrix2d::Identity();
    Point g = gradient(f, s.x);
    for (; s.iterations < max_iterations; ++s.iterations) {
        const Eigen::Vector2d gv(g[0], g[1]);
        if (gv.cwiseAbs().maxCoeff() < 1e-8 * (1.0 + std::abs(s.f))) {
            s.converged = true;
            break;
        }
        Eigen::Vector2d d = -hinv * gv;
        if (gv.dot(d) >= 0.0) {
            hinv.setIdentity();
            d = -gv;
        }
        double step = 1.0;
        Point trial{};
        double f_trial = 0.0;
        bool accepted = false;
        for (int back = 0; back < 60; ++back, step *= 0.5) {
            trial = clamp({s.x[0] + step * d(0), s.x[1] + step * d(1)});
            f_trial = f(trial);
            if (std::isfinite(f_trial) && f_trial <= s.f + 1e-4 * step * gv.dot(d)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No descent left along the quasi-Newton direction: stationary to
            // within difference-gradient accuracy.
            s.converged = gv.cwiseAbs().maxCoeff() < 1e-3 * (1.0 + std::abs(s.f));
            break;
        }
        const Point g_new = gradient(f, trial);
        const Eigen::Vector2d sv(trial[0] - s.x[0], trial[1] - s.x[1]);
        const Eigen::Vector2d yv(g_new[0] - g[0], g_new[1] - g[1]);
        const double f_old = s.f;
        s.x = trial;
        s.f = f_trial;
        g = g_new;
        const double sy = sv.dot(yv);
        if (sy > 1e-12 * sv.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::Matrix2d i_rsy = Eigen::Matrix2d::Identity() - rho * sv * yv.transpose();
            hinv = i_rsy * hinv * i_rsy.transpose() + rho * sv * sv.transpose();
        }
        if (std::abs(f_old - s.f) <= 1e-13 * (1.0 + std::abs(s.f)) && sv.norm() < 1e-10) {
            s.converged = true;
            ++s.iterations;
            break;
        }
    }
    return s;
}

}  // namespace

RobustObjective::RobustObjective(const Matrix& x, const Matrix& h, const Matrix& q, const Vector& y) {
    const Index n = x.rows();
    if (h.rows() != n || h.cols() != n || q.rows() != x.cols() || q.cols() != x.cols() || y.size() != n) {
        fail(ErrorCode::dimension_mismatch, "robust objective: inconsistent shapes");
    }
    const SymmetricEigen eig = symmetric_eigen(h);
    h_norm_ = eig.values(0);
    if (!(h_norm_ > 0.0)) fail(ErrorCode::not_positive_definite, "kernel not positive definite: H");
    h_eig_ = (eig.values / h_norm_).cwiseMax(0.0);
    const Matrix xe = eig.vectors.transpose() * x;
    a_ = xe * q * xe.transpose();
    a_ = 0.5 * (a_ + a_.transpose());
    y_rot_ = eig.vectors.transpose() * y;
    one_rot_ = eig.vectors.transpose() * Vector::Ones(n);
    if (!(y_rot_.squaredNorm() > 0.0)) fail(ErrorCode::invalid_argument, "zero response norm");
}

double RobustObjective::operator()(double lambda, double tau) const {
    const Index n = a_.rows();
    Matrix m = a_;
    for (Index i = 0; i < n; ++i) m(i, i) += lambda / (tau * h_eig_(i) + 1.0 - tau);
    const Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Vector zy = llt.matrixL().solve(y_rot_);
    const Vector z1 = llt.matrixL().solve(one_rot_);
    const double s11 = z1.squaredNorm();
    const double s1y = z1.dot(zy);
    const double quad = zy.squaredNorm() - s1y * s1y / s11;
    if (!(quad > 0.0)) return std::numeric_limits<double>::infinity();
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double dof = static_cast<double>(n - 1);
    return dof + dof * std::log(quad / dof) + logdet + std::log(s11);
}

RobustWeights estimate_tau(const TwoWayDataset& centered, const RobustOptions& options) {
    const RobustObjective objective(centered.x, centered.h, centered.q, centered.response());
    auto f = [&](const Point& x) { return objective(std::exp(x[0]), tau_of(x[1])); };

    std::vector<Point> starts;
    for (double loglam : {-4.0, 0.0, 4.0}) {
        for (double tau : {0.1, 0.5, 0.9, 0.99}) starts.push_back({loglam, t_of(tau)});
    }
    std::vector<Search> results(starts.size());
    parallel_for(starts.size(), resolve_threads(options.threads),
                 [&](std::size_t i) { results[i] = bfgs(f, starts[i], options.max_iterations); });

    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].f < results[best].f) best = i;
    }
    if (!std::isfinite(results[best].f)) {
        fail(ErrorCode::numerical, "robust objective is not finite at any start");
    }
    RobustWeights out;
    out.lambda_hq_hat = std::exp(results[best].x[0]);
    out.tau_hat = tau_of(results[best].x[1]);
    out.neg_loglik = results[best].f;
    // As lambda -> 0 the row kernel drops out and tau is unidentified; when the
    // data cannot tell tau apart, keep the supplied structure.
    const double f_top = objective(out.lambda_hq_hat, kTauMax);
    if (f_top <= out.neg_loglik + kTauTieTolerance) {
        out.tau_hat = kTauMax;
        out.neg_loglik = std::min(out.neg_loglik, f_top);
    }
    out.iterations = results[best].iterations;
    out.converged = results[best].converged;
    out.h_norm = objective.h_norm();
    return out;
}

Matrix mixed_row_kernel(const Matrix& h, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) fail(ErrorCode::invalid_argument, "tau must lie in (0, 1]");
    if (tau == 1.0) return h;
    const double norm = spectral_norm_symmetric(h);
    Matrix out = tau * h;
    out.diagonal().array() += (1.0 - tau) * norm;
    return out;
}

RobustGmdiReport run_robust_gmdi(const TwoWayDataset& raw, const GmdiOptions& options, const RobustOptions& robust) {
    validate_dataset(raw);
    const PreparedData prep = prepare(raw, options.standardize);
    RobustGmdiReport out;
    out.weights = estimate_tau(prep.data, robust);
    TwoWayDataset mixed = raw;
    mixed.h = mixed_row_kernel(raw.h, out.weights.tau_hat);
    out.report = run_gmdi(mixed, options);
    return out;
}

}  // namespace gmdkit
