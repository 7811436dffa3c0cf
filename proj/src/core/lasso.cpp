#include "gmdkit/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gmdkit {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

void check_shapes(const Matrix& z, const Vector& y, Index p_expected) {
    if (z.rows() != y.size()) {
        fail(ErrorCode::dimension_mismatch, "lasso: design has " + std::to_string(z.rows()) +
                                                " rows but y has length " + std::to_string(y.size()));
    }
    if (p_expected >= 0 && p_expected != z.cols()) {
        fail(ErrorCode::dimension_mismatch, "lasso: penalty length " + std::to_string(p_expected) +
                                                " does not match " + std::to_string(z.cols()) + " columns");
    }
}

// Shared driver: `update(j, partial_corr, col_norm2)` returns the new b_j.
template <typename Update>
LassoResult coordinate_descent(const Matrix& z, const Vector& y, const LassoOptions& options,
                               Update&& update) {
    const Index n = z.rows();
    const Index p = z.cols();
    Vector norm2(p);
    for (Index j = 0; j < p; ++j) norm2(j) = z.col(j).squaredNorm();
    const Vector scale = (norm2 / static_cast<double>(n)).cwiseSqrt();

    LassoResult out;
    out.coef = Vector::Zero(p);
    Vector resid = y;
    std::vector<Index> active;

    auto sweep = [&](bool full) {
        double max_change = 0.0;
        auto visit = [&](Index j) {
            if (norm2(j) <= 0.0) return;
            const double old = out.coef(j);
            const double corr = z.col(j).dot(resid) + norm2(j) * old;
            const double fresh = update(j, corr, norm2(j), out.coef);
            if (fresh != old) {
                resid.noalias() -= (fresh - old) * z.col(j);
                out.coef(j) = fresh;
                max_change = std::max(max_change, std::abs(fresh - old) * scale(j));
            }
        };
        if (full) {
            for (Index j = 0; j < p; ++j) visit(j);
        } else {
            for (Index j : active) visit(j);
        }
        return max_change;
    };

    while (out.sweeps < options.max_sweeps) {
        out.max_change = sweep(true);
        ++out.sweeps;
        if (out.max_change < options.tol) {
            out.converged = true;
            break;
        }
        active.clear();
        for (Index j = 0; j < p; ++j) {
            if (out.coef(j) != 0.0) active.push_back(j);
        }
        while (out.sweeps < options.max_sweeps) {
            const double change = sweep(false);
            ++out.sweeps;
            if (change < options.tol) break;
        }
    }
    return out;
}

}  // namespace

LassoResult weighted_lasso(const Matrix& z, const Vector& y, const Vector& penalty,
                           const LassoOptions& options) {
    check_shapes(z, y, penalty.size());
    if ((penalty.array() < 0.0).any()) fail(ErrorCode::invalid_argument, "lasso penalties must be nonnegative");
    LassoResult out = coordinate_descent(z, y, options, [&](Index j, double corr, double norm2, const Vector&) {
        return soft_threshold(corr, penalty(j)) / norm2;
    });
    out.objective = lasso_objective(z, y, penalty, out.coef);
    if (!out.converged) {
        fail(ErrorCode::convergence,
             "weighted lasso did not converge after " + std::to_string(out.sweeps) +
                 " sweeps (max coordinate change " + std::to_string(out.max_change) +
                 ", KKT violation " + std::to_string(lasso_kkt_violation(z, y, penalty, out.coef)) + ")");
    }
    return out;
}

double lasso_objective(const Matrix& z, const Vector& y, const Vector& penalty, const Vector& coef) {
    return 0.5 * (y - z * coef).squaredNorm() + penalty.dot(coef.cwiseAbs());
}

double lasso_kkt_violation(const Matrix& z, const Vector& y, const Vector& penalty, const Vector& coef) {
    const Vector grad = z.transpose() * (y - z * coef);
    double worst = 0.0;
    for (Index j = 0; j < coef.size(); ++j) {
        const double v = coef(j) != 0.0 ? std::abs(grad(j) - penalty(j) * (coef(j) > 0 ? 1.0 : -1.0))
                                        : std::max(std::abs(grad(j)) - penalty(j), 0.0);
        worst = std::max(worst, v);
    }
    return worst;
}

LassoResult organic_lasso(const Matrix& z, const Vector& y, double lambda, const LassoOptions& options) {
    check_shapes(z, y, -1);
    if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "organic lasso lambda must be nonnegative");
    const double n = static_cast<double>(z.rows());
    double l1 = 0.0;
    LassoResult out = coordinate_descent(z, y, options, [&](Index j, double corr, double norm2, const Vector& coef) {
        const double others = l1 - std::abs(coef(j));
        const double fresh =
            soft_threshold(2.0 * corr / n, 4.0 * lambda * others) / (2.0 * norm2 / n + 4.0 * lambda);
        l1 = std::max(others, 0.0) + std::abs(fresh);
        return fresh;
    });
    out.objective = organic_objective(z, y, lambda, out.coef);
    if (!out.converged) {
        fail(ErrorCode::convergence, "organic lasso did not converge after " + std::to_string(out.sweeps) +
                                         " sweeps (max coordinate change " +
                                         std::to_string(out.max_change) + ")");
    }
    return out;
}

double organic_objective(const Matrix& z, const Vector& y, double lambda, const Vector& coef) {
    const double l1 = coef.lpNorm<1>();
    return (y - z * coef).squaredNorm() / static_cast<double>(z.rows()) + 2.0 * lambda * l1 * l1;
}

double organic_kkt_violation(const Matrix& z, const Vector& y, double lambda, const Vector& coef) {
    const double n = static_cast<double>(z.rows());
    const Vector grad = (2.0 / n) * (z.transpose() * (y - z * coef));
    const double bound = 4.0 * lambda * coef.lpNorm<1>();
    double worst = 0.0;
    for (Index j = 0; j < coef.size(); ++j) {
        const double v = coef(j) != 0.0 ? std::abs(grad(j) - bound * (coef(j) > 0 ? 1.0 : -1.0))
                                        : std::max(std::abs(grad(j)) - bound, 0.0);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace gmdkit
