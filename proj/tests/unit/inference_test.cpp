#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gmdkit/inference.hpp"
#include "gmdkit/lasso.hpp"
#include "support.hpp"

using namespace gmdkit;
using namespace gmdtest;

namespace {

// Q / ||Q||_2 eigenpairs from an independent solver.
struct QBasis {
    Matrix d;
    Vector delta;
};

QBasis q_basis(const Matrix& q) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(q);
    QBasis b;
    b.d = es.eigenvectors();
    b.delta = es.eigenvalues() / es.eigenvalues().maxCoeff();
    return b;
}

double initial_objective(const TwoWayDataset& d, const QBasis& qb, double lambda, const Vector& beta) {
    const Vector r = *d.y - d.x * beta;
    const Vector b = qb.d.transpose() * beta;
    return 0.5 * r.dot(d.h * r) + lambda * (qb.delta.cwiseSqrt().cwiseInverse().array() * b.array().abs()).sum();
}

// Plain ISTA in the eigenbasis.
double ista_reference(const TwoWayDataset& d, const QBasis& qb, double lambda, int iterations) {
    const Matrix z = d.x * qb.d;
    const Matrix g = z.transpose() * d.h * z;
    const Vector c = z.transpose() * d.h * *d.y;
    const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(g).eigenvalues().maxCoeff();
    const Vector pen = lambda * qb.delta.cwiseSqrt().cwiseInverse();
    Vector b = Vector::Zero(z.cols());
    for (int it = 0; it < iterations; ++it) {
        const Vector u = b - step * (g * b - c);
        for (Index j = 0; j < b.size(); ++j) {
            const double t = step * pen(j);
            b(j) = u(j) > t ? u(j) - t : (u(j) < -t ? u(j) + t : 0.0);
        }
    }
    return initial_objective(d, qb, lambda, qb.d * b);
}

}  // namespace

TEST_CASE("initial estimator at lambda 0 is weighted least squares") {
    Rng rng(1);
    const TwoWayDataset d = random_dataset(15, 4, rng);
    const InitialEstimate init = initial_estimator(d, 0.0);
    const Vector wls = (d.x.transpose() * d.h * d.x).ldlt().solve(d.x.transpose() * d.h * *d.y);
    CHECK(rel_err(init.beta_init, wls) < 1e-6);
}

TEST_CASE("initial estimator deadzone above lambda_max") {
    Rng rng(2);
    const TwoWayDataset d = random_dataset(12, 6, rng);
    const QBasis qb = q_basis(d.q);
    const Vector score = (d.x * qb.d).transpose() * d.h * *d.y;
    const double lmax = (qb.delta.cwiseSqrt().array() * score.array().abs()).maxCoeff();
    CHECK(initial_lambda_max(d, factor_kernel(d.h, "H"), normalized_q_eigen(d.q)) == doctest::Approx(lmax));
    CHECK(initial_estimator(d, lmax * 1.0001).beta_tilde.norm() == 0.0);
    CHECK(initial_estimator(d, lmax * 0.9).beta_tilde.norm() > 0.0);
}

TEST_CASE("initial estimator matches a slow proximal-gradient reference") {
    Rng rng(3);
    for (int rep = 0; rep < 3; ++rep) {
        const TwoWayDataset d = random_dataset(20, 5, rng);
        const QBasis qb = q_basis(d.q);
        const double lambda = 0.5;
        const InitialEstimate init = initial_estimator(d, lambda);
        CHECK(init.kkt_violation < 1e-6);
        const double ours = initial_objective(d, qb, lambda, init.beta_init);
        CHECK(ours <= ista_reference(d, qb, lambda, 200000) + 1e-8);
    }
}

TEST_CASE("lasso solvers satisfy their optimality conditions") {
    Rng rng(4);
    const Matrix z = standard_normal(30, 12, rng);
    const Vector y = standard_normal(30, rng);
    const Vector pen = Vector::Constant(12, 3.0);
    const LassoResult fit = weighted_lasso(z, y, pen);
    CHECK(fit.converged);
    CHECK(lasso_kkt_violation(z, y, pen, fit.coef) < 1e-6);
    CHECK(fit.objective == doctest::Approx(lasso_objective(z, y, pen, fit.coef)));
    const LassoResult org = organic_lasso(z, y, 0.05);
    CHECK(org.converged);
    CHECK(organic_kkt_violation(z, y, 0.05, org.coef) < 1e-6);
    // Perturbations do not decrease the organic objective.
    for (Index j = 0; j < 12; ++j) {
        Vector b = org.coef;
        b(j) += 1e-4;
        CHECK(organic_objective(z, y, 0.05, b) >= org.objective - 1e-12);
        b(j) -= 2e-4;
        CHECK(organic_objective(z, y, 0.05, b) >= org.objective - 1e-12);
    }
}

TEST_CASE("noise estimate") {
    Rng rng(5);
    TwoWayDataset d = random_dataset(40, 5, rng);
    // Response H-orthogonal to every rotated column: b = 0 is optimal.
    const Matrix proj = d.x * (d.x.transpose() * d.h * d.x).ldlt().solve(d.x.transpose() * d.h);
    d.y = *d.y - proj * *d.y;
    CHECK(estimate_sigma2(d) == doctest::Approx(d.y->dot(d.h * *d.y) / 40.0).epsilon(1e-10));

    TwoWayDataset s = random_dataset(40, 5, rng);
    const double base = estimate_sigma2(s);
    s.y = 3.0 * *s.y;
    CHECK(estimate_sigma2(s) == doctest::Approx(9.0 * base).epsilon(1e-8));

    s.y = Vector::Zero(40);
    CHECK_THROWS_AS(estimate_sigma2(s), Error);
}

TEST_CASE("bias correction") {
    Rng rng(6);
    TwoWayDataset d = random_dataset(12, 5, rng);
    const Vector beta = standard_normal(5, rng);
    d.y = d.x * beta;
    const GmdFactors f = gmd(d);
    Vector w = Vector::Zero(f.rank());
    w.head(2).setOnes();
    const Matrix xi = xi_matrix(d.q, f, w);
    const Vector beta_w = membership_beta(d.q, f, w, fit_gamma(f, d.h, *d.y));
    const Vector ones = Vector::Ones(5);
    CHECK((bias_correct(beta_w, xi, beta, ones) - beta).cwiseAbs().maxCoeff() < 1e-8);

    const Vector init = standard_normal(5, rng);
    const Vector zeros = Vector::Zero(5);
    Vector moved = init;
    moved(2) += 10.0;
    CHECK(bias_correct(beta_w, xi, init, zeros)(2) == doctest::Approx(bias_correct(beta_w, xi, moved, zeros)(2)));

    const Vector h = (Vector(5) << 1, 0, 0.5, 1, 0).finished();
    const Vector ours = bias_correct(beta_w, xi, init, h);
    for (Index j = 0; j < 5; ++j) {
        double v = beta_w(j);
        for (Index m = 0; m < 5; ++m) {
            if (m != j) v -= xi(j, m) * init(m);
        }
        v -= h(j) * (xi(j, j) - 1.0) * init(j);
        CHECK(ours(j) == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("variance R_jj") {
    Rng rng(7);
    const TwoWayDataset id = random_dataset(20, 4, rng, true);
    const GmdFactors f = gmd(id);
    const Vector all = Vector::Ones(4);
    const Vector ols = 2.0 * (id.x.transpose() * id.x).inverse().diagonal();
    CHECK(rel_err(variance_rjj(id.q, f, all, 2.0), ols) < 1e-10);
    CHECK(rel_err(variance_rjj(id.q, f, all, 4.0), 2.0 * variance_rjj(id.q, f, all, 2.0)) < 1e-14);

    const TwoWayDataset d = random_dataset(8, 5, rng);
    const GmdFactors g = gmd(d);
    const Vector w = (Vector(g.rank()) << 1.0, 0.8, 0.5, 0.0, 0.3).finished();
    const Matrix psi = d.h.inverse();
    const Matrix lpsi = psi.llt().matrixL();
    const Matrix a = d.q * g.v * w.asDiagonal() * g.s.cwiseInverse().asDiagonal() * g.u.transpose() * d.h * lpsi;
    CHECK(rel_err(variance_rjj(d.q, g, w, 1.5), 1.5 * (a * a.transpose()).diagonal()) < 1e-8);
}

TEST_CASE("psi bound") {
    Rng rng(8);
    const TwoWayDataset d = random_dataset(12, 5, rng);
    const GmdFactors f = gmd(d);
    const SymmetricEigen qe = normalized_q_eigen(d.q);
    const Vector ones = Vector::Ones(5);
    const Matrix xi_full = xi_matrix(d.q, f, Vector::Ones(f.rank()));
    CHECK(psi_bound(xi_full, qe.vectors, ones, 0.05, 12).cwiseAbs().maxCoeff() < 1e-10);

    Vector w = Vector::Zero(f.rank());
    w.head(3).setOnes();
    const Matrix xi = xi_matrix(d.q, f, w);
    const Vector lo = psi_bound(xi, qe.vectors, ones, 0.05, 12);
    const Vector hi = psi_bound(xi, qe.vectors, ones, 0.45, 12);
    CHECK((lo.array() < hi.array()).all());

    const Vector h = (Vector(5) << 1, 0, 1, 0, 1).finished();
    const Vector ours = psi_bound(xi, qe.vectors, h, 0.2, 12);
    const double rate = std::pow(std::log(5.0) / 12.0, 0.3);
    for (Index j = 0; j < 5; ++j) {
        double best = 0.0;
        for (Index k = 0; k < 5; ++k) {
            double v = 0.0;
            for (Index m = 0; m < 5; ++m) {
                double a = xi(j, m);
                if (m == j) a = a - (1.0 - h(j)) * xi(j, j) - h(j);
                v += a * qe.vectors(m, k);
            }
            best = std::max(best, std::abs(v));
        }
        CHECK(ours(j) == doctest::Approx(best * rate).epsilon(1e-12));
    }
}

TEST_CASE("p-values and detectable effects") {
    const Vector b = (Vector(3) << 0.5, 1.959964 + 0.25, -0.1).finished();
    const Vector psi = (Vector(3) << 0.6, 0.25, 0.0).finished();
    const Vector r = (Vector(3) << 1.0, 1.0, 1.0).finished();
    const Vector p = p_values(b, psi, r);
    CHECK(p(0) == 1.0);
    CHECK(p(1) == doctest::Approx(0.05).epsilon(1e-5));
    CHECK(p(2) > 0.9);

    // Monotone in |beta| and psi.
    CHECK(p_values(Vector::Constant(1, 2.0), Vector::Zero(1), Vector::Ones(1))(0) <
          p_values(Vector::Constant(1, 1.0), Vector::Zero(1), Vector::Ones(1))(0));
    CHECK(p_values(Vector::Constant(1, 2.0), Vector::Constant(1, 0.5), Vector::Ones(1))(0) >
          p_values(Vector::Constant(1, 2.0), Vector::Zero(1), Vector::Ones(1))(0));

    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(min_detectable_effect(0.3, 1.0, 0.0, 4.0, 0.05, 0.05) == doctest::Approx(2.0 * 1.959964 * 2.0).epsilon(1e-6));
    const double z = normal_quantile(0.975) + normal_quantile(0.6);
    CHECK(min_detectable_effect(0.3, 1.0, 0.1, 1.0, 0.05, 0.8) == doctest::Approx(0.2 + z));
    CHECK(min_detectable_effect(0.5, 0.0, 0.1, 1.0, 0.05, 0.8) == doctest::Approx((0.2 + z) / 0.5));
}

TEST_CASE("BY q-values") {
    const Vector p = (Vector(5) << 0.01, 0.04, 0.03, 0.5, 0.002).finished();
    const Vector q = by_qvalues(p);
    const double c = 1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5;
    // Sorted p: 0.002, 0.01, 0.03, 0.04, 0.5.
    std::vector<double> raw = {0.002 * 5 * c / 1, 0.01 * 5 * c / 2, 0.03 * 5 * c / 3, 0.04 * 5 * c / 4, 0.5 * 5 * c / 5};
    for (int k = 3; k >= 0; --k) raw[k] = std::min(raw[k], raw[k + 1]);
    for (double& v : raw) v = std::min(v, 1.0);
    CHECK(q(4) == doctest::Approx(raw[0]));
    CHECK(q(0) == doctest::Approx(raw[1]));
    CHECK(q(2) == doctest::Approx(raw[2]));
    CHECK(q(1) == doctest::Approx(raw[3]));
    CHECK(q(3) == doctest::Approx(raw[4]));
    CHECK((q.array() >= p.array()).all());
}

TEST_CASE("run_gmdi on noiseless full-rank data") {
    Rng rng(9);
    TwoWayDataset d = random_dataset(30, 6, rng);
    Vector beta = Vector::Zero(6);
    beta(0) = 2.0;
    beta(3) = -1.0;
    d.y = d.x * beta;
    GmdiOptions o;
    o.gmdr.fixed_top_k = 6;
    o.standardize = false;
    const InferenceReport rep = run_gmdi(d, o);
    for (Index j : {1, 2, 4, 5}) CHECK(rep.p_value(j) > 1.0 - 1e-6);
    CHECK(rep.psi.cwiseAbs().maxCoeff() < 1e-8);

    const InferenceReport again = run_gmdi(d, o);
    CHECK(again.p_value == rep.p_value);
    CHECK(again.sigma2_hat == rep.sigma2_hat);
}

TEST_CASE("run_gmdi rejects invalid options") {
    Rng rng(10);
    const TwoWayDataset d = random_dataset(10, 3, rng);
    GmdiOptions o;
    o.r = 0.5;
    CHECK_THROWS_AS(run_gmdi(d, o), Error);
    o.r = 0.05;
    o.h = 2.0;
    CHECK_THROWS_AS(run_gmdi(d, o), Error);
    TwoWayDataset no_y = d;
    no_y.y.reset();
    CHECK_THROWS_AS(run_gmdi(no_y), Error);
}
