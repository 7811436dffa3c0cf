#pragma once

#include "gmdkit/types.hpp"

namespace gmdkit {

struct LassoOptions {
    double tol = 1e-8;        // max coordinate change, columns scaled to norm^2 = n
    int max_sweeps = 100000;
};

struct LassoResult {
    Vector coef;
    double objective = 0.0;
    int sweeps = 0;
    double max_change = 0.0;
    bool converged = false;
};

// min_b 1/2 ||y - Z b||^2 + sum_j penalty_j |b_j| by cyclic coordinate
// descent with active-set sweeps. Columns are handled in scaled coordinates
// (norm^2 = n) so the stopping rule is scale free.
LassoResult weighted_lasso(const Matrix& z, const Vector& y, const Vector& penalty,
                           const LassoOptions& options = {});

double lasso_objective(const Matrix& z, const Vector& y, const Vector& penalty, const Vector& coef);

// Largest violation of the stationarity conditions
// z_j^T r = penalty_j sign(b_j) (b_j != 0), |z_j^T r| <= penalty_j (b_j = 0).
double lasso_kkt_violation(const Matrix& z, const Vector& y, const Vector& penalty, const Vector& coef);

// Organic lasso: min_b (1/n) ||y - Z b||^2 + 2 lambda ||b||_1^2. The
// squared penalty is handled exactly by coordinate descent: with the other
// coordinates fixed, each one-dimensional problem has a closed-form
// soft-threshold solution.
LassoResult organic_lasso(const Matrix& z, const Vector& y, double lambda,
                          const LassoOptions& options = {});

double organic_objective(const Matrix& z, const Vector& y, double lambda, const Vector& coef);
double organic_kkt_violation(const Matrix& z, const Vector& y, double lambda, const Vector& coef);

}  // namespace gmdkit
