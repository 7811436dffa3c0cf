// Acceptance suite: one PASS/FAIL line per criterion.
//
//   gmdkit_acceptance [N ...] [--known-red N,N]
//
// With no numbers every criterion runs. Criteria listed in --known-red still
// print their honest verdict but do not fail the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmdkit/estimators.hpp"
#include "gmdkit/inference.hpp"
#include "gmdkit/linalg.hpp"
#include "gmdkit/random.hpp"
#include "gmdkit/robust.hpp"
#include "gmdkit/simulate.hpp"
#include "gmdkit/structure_tests.hpp"

using namespace gmdkit;

namespace {

// Tolerances and run sizes.
constexpr int kC1Instances = 200;
constexpr Index kC1MaxDim = 30;
constexpr double kC1ConstraintTol = 1e-8;
constexpr double kC1ReconTol = 1e-8;
constexpr double kC1EigenTol = 1e-6;
constexpr double kC1SvdTol = 1e-10;
constexpr double kC1Seconds = 30.0;

constexpr int kC2Instances = 100;
constexpr Index kC2MaxDim = 20;
constexpr double kC2RelTol = 1e-8;
constexpr double kC2Seconds = 30.0;

constexpr int kC3Instances = 50;
constexpr double kC3Tol = 1e-6;

constexpr int kC4Reps = 100;
constexpr double kC4Margin = 0.01;
constexpr double kC4Reference = 0.946;
constexpr double kC4Band = 0.05;

constexpr int kC5Reps = 100;
constexpr double kC5Alpha = 0.05;
constexpr double kC5Type1 = 0.07;

constexpr int kC6Datasets = 50;
constexpr int kC6Permutations = 999;
constexpr double kC6Level = 0.01;
constexpr double kC6High = 0.95;
constexpr double kC6Low = 0.05;
constexpr double kC6MirkatH5 = 0.40;

constexpr int kC7Runs = 50;
constexpr double kC7KrvLevel = 0.05;
constexpr double kC7Q1 = 0.90;
constexpr double kC7Q2 = 0.10;
constexpr double kC7Type1 = 0.07;

constexpr int kC8Reps = 100;
constexpr int kC8TauRuns = 50;
constexpr double kC8PowerSlack = 0.05;
constexpr double kC8TauLevel = 0.9;
constexpr double kC8TauShare = 0.80;

constexpr int kC9Instances = 20;
constexpr Index kC9MaxN = 60;
constexpr int kC9Grid = 50;
constexpr double kC9Tol = 1e-4;

constexpr int kC10LassoInstances = 50;
constexpr double kC10LassoTol = 1e-8;
constexpr int kC10IstaIterations = 1000000;
constexpr int kC10NoiseRuns = 100;
constexpr double kC10RelErr = 0.20;
constexpr double kC10Share = 0.90;

constexpr int kC11Runs = 200;
constexpr int kC11Permutations = 999;
constexpr double kC11Ks = 0.1;
constexpr int kC11GmdiReps = 100;
constexpr double kC11Type1 = 0.07;

constexpr std::uint64_t kSeed = 7;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double share(const std::vector<double>& p, double level) {
    return static_cast<double>(std::count_if(p.begin(), p.end(), [&](double x) { return x < level; })) /
           static_cast<double>(p.size());
}

Matrix random_spd(Index m, Rng& rng) {
    const Matrix a = standard_normal(m, m, rng);
    Matrix k = a * a.transpose() / static_cast<double>(m);
    k.diagonal().array() += 0.5;
    return 0.5 * (k + k.transpose());
}

Index dim_in(Rng& rng, Index lo, Index hi) { return lo + static_cast<Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); }

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Kolmogorov-Smirnov distance of a sample from U[0, 1].
double ks_uniform(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const double m = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        d = std::max(d, std::abs(static_cast<double>(i + 1) / m - p[i]));
        d = std::max(d, std::abs(p[i] - static_cast<double>(i) / m));
    }
    return d;
}

Verdict c1_gmd() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = make_rng(kSeed, 1);
    double worst_constraint = 0.0;
    double worst_recon = 0.0;
    double worst_eigen = 0.0;
    double worst_us = 0.0;
    double worst_svd = 0.0;
    for (int it = 0; it < kC1Instances; ++it) {
        const Index n = dim_in(rng, 2, kC1MaxDim);
        const Index p = dim_in(rng, 2, kC1MaxDim);
        TwoWayDataset d;
        d.x = standard_normal(n, p, rng);
        d.h = random_spd(n, rng);
        d.q = random_spd(p, rng);
        const GmdFactors f = gmd(d);
        const Index k = f.rank();
        worst_constraint = std::max({worst_constraint, (f.u.transpose() * d.h * f.u - Matrix::Identity(k, k)).norm(),
                                     (f.v.transpose() * d.q * f.v - Matrix::Identity(k, k)).norm()});
        const Matrix recon = f.u * f.s.asDiagonal() * f.v.transpose();
        worst_recon = std::max(worst_recon, hq_norm(d.x - recon, d.h, d.q) / hq_norm(d.x, d.h, d.q));
        const Matrix m = d.x.transpose() * d.h * d.x * d.q;
        for (Index j = 0; j < k; ++j) {
            const double s2 = f.s(j) * f.s(j);
            worst_eigen = std::max(worst_eigen, (m * f.v.col(j) - s2 * f.v.col(j)).norm() / (s2 * f.v.col(j).norm()));
        }
        const Matrix xqv = d.x * d.q * f.v;
        worst_us = std::max(worst_us, (f.u * f.s.asDiagonal() - xqv).norm() / xqv.norm());

        TwoWayDataset id = d;
        id.h = Matrix::Identity(n, n);
        id.q = Matrix::Identity(p, p);
        const Vector sv = Eigen::JacobiSVD<Matrix>(d.x).singularValues();
        const GmdFactors g = gmd(id);
        worst_svd = std::max(worst_svd, (g.s - sv.head(g.rank())).cwiseAbs().maxCoeff());
    }
    const double secs = elapsed(t0);
    Verdict v;
    v.pass = worst_constraint <= kC1ConstraintTol && worst_recon <= kC1ReconTol && worst_eigen <= kC1EigenTol &&
             worst_us <= kC1ReconTol && worst_svd <= kC1SvdTol && secs < kC1Seconds;
    v.detail = "constraint " + fmt("%.2e", worst_constraint) + ", recon " + fmt("%.2e", worst_recon) + ", eigen " +
               fmt("%.2e", worst_eigen) + ", US " + fmt("%.2e", worst_us) + ", svd " + fmt("%.2e", worst_svd) + ", " +
               fmt("%.1f s", secs);
    return v;
}

Verdict c2_kpr() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = make_rng(kSeed, 2);
    double worst = 0.0;
    double worst_zero = 0.0;
    int full_rank_cases = 0;
    for (int it = 0; it < kC2Instances; ++it) {
        const Index n = dim_in(rng, 2, kC2MaxDim);
        const Index p = dim_in(rng, 1, kC2MaxDim);
        TwoWayDataset d;
        d.x = standard_normal(n, p, rng);
        d.h = random_spd(n, rng);
        d.q = random_spd(p, rng);
        d.y = standard_normal(n, rng);
        const double eta = std::exp(-3.0 + 6.0 * static_cast<double>(rng() % 1000) / 999.0);
        const Vector primal =
            (d.x.transpose() * d.h * d.x + eta * d.q.inverse()).ldlt().solve(d.x.transpose() * d.h * *d.y);
        KprOptions o;
        o.eta = eta;
        const Vector dual = fit_kpr(d, o).beta;
        worst = std::max(worst, (dual - primal).norm() / primal.norm());
        if (p <= n) {
            ++full_rank_cases;
            KprOptions z;
            z.eta = 0.0;
            GmdrOptions all;
            all.fixed_top_k = p;
            const Vector full = fit_gmdr(d, all).beta;
            worst_zero = std::max(worst_zero, (fit_kpr(d, z).beta - full).norm() / full.norm());
        }
    }
    const double secs = elapsed(t0);
    Verdict v;
    v.pass = worst <= kC2RelTol && worst_zero <= kC2RelTol && full_rank_cases > 0 && secs < kC2Seconds;
    v.detail = "dual vs primal " + fmt("%.2e", worst) + ", eta=0 vs full GMDR " + fmt("%.2e", worst_zero) + " (" +
               std::to_string(full_rank_cases) + " cases), " + fmt("%.1f s", secs);
    return v;
}

Verdict c3_unbiased() {
    Rng rng = make_rng(kSeed, 3);
    double worst = 0.0;
    for (int it = 0; it < kC3Instances; ++it) {
        const Index p = dim_in(rng, 1, 15);
        const Index n = dim_in(rng, p, 30);
        TwoWayDataset d;
        d.x = standard_normal(n, p, rng);
        d.h = random_spd(n, rng);
        d.q = random_spd(p, rng);
        const Vector beta = standard_normal(p, rng);
        d.y = d.x * beta;
        GmdrOptions all;
        all.fixed_top_k = p;
        worst = std::max(worst, (fit_gmdr(d, all).beta - beta).cwiseAbs().maxCoeff());
    }
    return {worst <= kC3Tol, "max |beta - beta*| = " + fmt("%.2e", worst)};
}

Verdict c4_table1() {
    bool pass = true;
    std::string detail;
    for (double r2 : {0.4, 0.6, 0.8}) {
        SettingSpec spec;
        spec.r_squared = r2;
        spec.replicates = kC4Reps;
        spec.seed = kSeed;
        const SimulationReport rep = run_experiment(spec, {SimMethod::loocv_vi, SimMethod::loocv_top});
        const double vi = mean(rep.result(SimMethod::loocv_vi).rmse);
        const double top = mean(rep.result(SimMethod::loocv_top).rmse);
        pass = pass && vi <= top + kC4Margin;
        if (r2 == 0.4) pass = pass && std::abs(vi - kC4Reference) <= kC4Band;
        detail += "R2 " + fmt("%.1f", r2) + ": VI " + fmt("%.3f", vi) + " TOP " + fmt("%.3f", top) + "; ";
    }
    return {pass, detail};
}

Verdict c5_calibration() {
    std::map<double, std::pair<double, double>> power;
    double worst_type1 = 0.0;
    for (double r2 : {0.4, 0.8}) {
        SettingSpec spec;
        spec.r_squared = r2;
        spec.replicates = kC5Reps;
        spec.seed = kSeed;
        ExperimentOptions opts;
        opts.alpha = kC5Alpha;
        const SimulationReport rep = run_experiment(spec, {SimMethod::gmdi_d, SimMethod::gmdi_k}, opts);
        const MethodResult& d = rep.result(SimMethod::gmdi_d);
        const MethodResult& k = rep.result(SimMethod::gmdi_k);
        worst_type1 = std::max({worst_type1, mean(d.type1), mean(k.type1)});
        power[r2] = {mean(d.power), mean(k.power)};
    }
    const bool pass = worst_type1 <= kC5Type1 && power[0.8].first > power[0.4].first &&
                      power[0.8].second > power[0.4].second && power[0.4].first >= power[0.4].second;
    return {pass, "max type-I " + fmt("%.3f", worst_type1) + "; power d " + fmt("%.3f", power[0.4].first) + " -> " +
                      fmt("%.3f", power[0.8].first) + ", k " + fmt("%.3f", power[0.4].second) + " -> " +
                      fmt("%.3f", power[0.8].second)};
}

Verdict c6_screens() {
    bool pass = true;
    std::string detail;
    for (int variant = 1; variant <= 6; ++variant) {
        SettingSpec spec;
        spec.setting = Setting::III;
        spec.h_variant = variant;
        spec.replicates = kC6Datasets;
        spec.seed = kSeed;
        ExperimentOptions opts;
        opts.permutations = kC6Permutations;
        opts.screen_alpha = kC6Level;
        const SimulationReport rep = run_experiment(spec, {SimMethod::krv_h, SimMethod::mirkat_h}, opts);
        const std::vector<double>& k = rep.result(SimMethod::krv_h).p_value;
        const std::vector<double>& m = rep.result(SimMethod::mirkat_h).p_value;
        int both = 0;
        for (std::size_t i = 0; i < k.size(); ++i) both += (k[i] < kC6Level && m[i] < kC6Level) ? 1 : 0;
        const double flagged = static_cast<double>(both) / static_cast<double>(k.size());
        const double krv_share = share(k, kC6Level);
        const double mirkat_share = share(m, kC6Level);
        switch (variant) {
            case 1:
            case 2:
            case 4: pass = pass && flagged >= kC6High; break;
            case 3:
            case 6: pass = pass && flagged <= kC6Low; break;
            case 5: pass = pass && krv_share >= kC6High && mirkat_share <= kC6MirkatH5; break;
        }
        detail += "H" + std::to_string(variant) + " " + fmt("%.2f", flagged) + " (KRV " + fmt("%.2f", krv_share) +
                  ", MiRKAT " + fmt("%.2f", mirkat_share) + "); ";
    }
    return {pass, detail};
}

Verdict c7_setting2() {
    double q_share[3] = {0, 0, 0};
    double type1 = 0.0;
    for (int variant : {1, 2}) {
        SettingSpec spec;
        spec.setting = Setting::II;
        spec.q_variant = variant;
        spec.r_squared = 0.8;
        spec.replicates = kC7Runs;
        spec.seed = kSeed;
        std::vector<SimMethod> methods = {SimMethod::krv_q};
        if (variant == 1) {
            methods.push_back(SimMethod::gmdi_d);
            methods.push_back(SimMethod::gmdi_k);
        }
        const SimulationReport rep = run_experiment(spec, methods);
        q_share[variant] = share(rep.result(SimMethod::krv_q).p_value, kC7KrvLevel);
        if (variant == 1) {
            type1 = std::max(mean(rep.result(SimMethod::gmdi_d).type1), mean(rep.result(SimMethod::gmdi_k).type1));
        }
    }
    return {q_share[1] >= kC7Q1 && q_share[2] <= kC7Q2 && type1 <= kC7Type1,
            "KRV Q1 " + fmt("%.2f", q_share[1]) + ", Q2 " + fmt("%.2f", q_share[2]) + ", GMDI type-I (Q1) " +
                fmt("%.3f", type1)};
}

Verdict c8_robust() {
    bool pass = true;
    std::string detail;
    for (double theta : {0.5, 0.8}) {
        SettingSpec spec;
        spec.setting = Setting::IV;
        spec.theta = theta;
        spec.replicates = kC8Reps;
        spec.seed = kSeed;
        const SimulationReport rep = run_experiment(spec, {SimMethod::gmdi_k, SimMethod::r_gmdi_k});
        const MethodResult& g = rep.result(SimMethod::gmdi_k);
        const MethodResult& r = rep.result(SimMethod::r_gmdi_k);
        const double gt = mean(g.type1);
        const double rt = mean(r.type1);
        const double gp = mean(g.power);
        const double rp = mean(r.power);
        pass = pass && rt <= gt && rp >= gp - kC8PowerSlack;
        detail += "theta " + fmt("%.1f", theta) + ": type-I GMDI-k " + fmt("%.3f", gt) + " r-GMDI-k " +
                  fmt("%.3f", rt) + ", power GMDI-k " + fmt("%.3f", gp) + " r-GMDI-k " + fmt("%.3f", rp) + "; ";
    }
    SettingSpec spec;
    spec.setting = Setting::IV;
    spec.theta = 1.0;
    spec.replicates = kC8TauRuns;
    spec.seed = kSeed;
    const SimulationReport rep = run_experiment(spec, {SimMethod::r_gmdi_k});
    const std::vector<double>& tau = rep.result(SimMethod::r_gmdi_k).tau_hat;
    const double hit = static_cast<double>(std::count_if(tau.begin(), tau.end(), [](double t) { return t >= kC8TauLevel; })) /
                       static_cast<double>(tau.size());
    pass = pass && hit >= kC8TauShare;
    detail += "theta 1: tau_hat >= 0.9 in " + fmt("%.2f", hit);
    return {pass, detail};
}

Verdict c9_optimizer() {
    Rng rng = make_rng(kSeed, 9);
    double worst = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < kC9Instances; ++it) {
        const Index n = dim_in(rng, 10, kC9MaxN);
        const Index p = dim_in(rng, 3, 40);
        TwoWayDataset d;
        d.x = standard_normal(n, p, rng);
        d.h = random_spd(n, rng);
        d.q = random_spd(p, rng);
        const Matrix l = spd_inverse(d.h, "H").llt().matrixL();
        d.y = 0.3 * d.x * standard_normal(p, rng) + l * standard_normal(n, rng);
        const TwoWayDataset c = center_hq(d);
        const RobustObjective f(c.x, c.h, c.q, *c.y);
        double grid = std::numeric_limits<double>::infinity();
        for (int i = 0; i < kC9Grid; ++i) {
            for (int j = 0; j < kC9Grid; ++j) {
                const double loglam = -6.0 + 12.0 * i / (kC9Grid - 1);
                const double tau = 0.01 + 0.98 * j / (kC9Grid - 1);
                grid = std::min(grid, f(std::exp(loglam), tau));
            }
        }
        worst = std::max(worst, estimate_tau(c).neg_loglik - grid);
    }
    return {worst <= kC9Tol, "max (optimizer - grid) = " + fmt("%.2e", worst)};
}

double initial_objective(const TwoWayDataset& d, const Matrix& basis, const Vector& delta, double lambda,
                         const Vector& beta) {
    const Vector r = *d.y - d.x * beta;
    const Vector b = basis.transpose() * beta;
    return 0.5 * r.dot(d.h * r) + lambda * (delta.cwiseSqrt().cwiseInverse().array() * b.array().abs()).sum();
}

Verdict c10_lasso() {
    Rng rng = make_rng(kSeed, 10);
    double worst = 0.0;
    for (int it = 0; it < kC10LassoInstances; ++it) {
        const Index n = 20;
        const Index p = 5;
        TwoWayDataset d;
        d.x = standard_normal(n, p, rng);
        d.h = random_spd(n, rng);
        d.q = random_spd(p, rng);
        d.y = standard_normal(n, rng);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(d.q);
        const Matrix basis = es.eigenvectors();
        const Vector delta = es.eigenvalues() / es.eigenvalues().maxCoeff();
        const double lambda = 0.2 + 2.0 * static_cast<double>(rng() % 1000) / 999.0;

        const Matrix z = d.x * basis;
        const Matrix g = z.transpose() * d.h * z;
        const Vector c = z.transpose() * d.h * *d.y;
        const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(g).eigenvalues().maxCoeff();
        const Vector pen = lambda * delta.cwiseSqrt().cwiseInverse();
        Vector b = Vector::Zero(p);
        for (int k = 0; k < kC10IstaIterations; ++k) {
            const Vector u = b - step * (g * b - c);
            for (Index j = 0; j < p; ++j) {
                const double t = step * pen(j);
                b(j) = u(j) > t ? u(j) - t : (u(j) < -t ? u(j) + t : 0.0);
            }
        }
        const double ref = initial_objective(d, basis, delta, lambda, basis * b);
        const double ours = initial_objective(d, basis, delta, lambda, initial_estimator(d, lambda).beta_init);
        worst = std::max(worst, std::abs(ours - ref) / std::max(1.0, std::abs(ref)));
    }

    int good = 0;
    for (int run = 0; run < kC10NoiseRuns; ++run) {
        Rng r = make_rng(kSeed + 1000, static_cast<std::uint64_t>(run));
        const Index n = 500;
        const Index p = 10;
        TwoWayDataset d;
        d.x = standard_normal(n, p, r);
        d.h = block_ar_precision(n, n / 2, 0.5, 0.3);
        d.q = Matrix::Identity(p, p);
        const Matrix l_psi = spd_inverse(d.h, "H").llt().matrixL();
        d.y = l_psi * standard_normal(n, r);
        const double s2 = estimate_sigma2(d);
        good += std::abs(s2 - 1.0) < kC10RelErr ? 1 : 0;
    }
    const double frac = static_cast<double>(good) / kC10NoiseRuns;
    return {worst <= kC10LassoTol && frac >= kC10Share,
            "initial objective rel. gap " + fmt("%.2e", worst) + "; sigma2 within 20% in " + fmt("%.2f", frac)};
}

Verdict c11_null() {
    std::vector<double> krv_p;
    std::vector<double> mirkat_p;
    for (int run = 0; run < kC11Runs; ++run) {
        Rng r = make_rng(kSeed + 2000, static_cast<std::uint64_t>(run));
        const Index n = 40;
        const Matrix x = standard_normal(n, 15, r);
        const Matrix h = random_spd(n, r);
        const Vector y = standard_normal(n, r);
        PermutationOptions perm;
        perm.permutations = kC11Permutations;
        perm.seed = derive_seed(kSeed, static_cast<std::uint64_t>(run));
        krv_p.push_back(krv(x * x.transpose(), h, perm).p_value);
        mirkat_p.push_back(mirkat(y, h, perm).p_value);
    }
    const double ks_krv = ks_uniform(krv_p);
    const double ks_mirkat = ks_uniform(mirkat_p);

    SettingSpec spec;
    spec.r_squared = 0.6;
    spec.replicates = kC11GmdiReps;
    spec.seed = kSeed + 11;
    const SimulationReport rep = run_experiment(spec, {SimMethod::gmdi_d, SimMethod::gmdi_k});
    const double t1 = std::max(mean(rep.result(SimMethod::gmdi_d).type1), mean(rep.result(SimMethod::gmdi_k).type1));
    return {ks_krv < kC11Ks && ks_mirkat < kC11Ks && t1 <= kC11Type1,
            "KS KRV " + fmt("%.3f", ks_krv) + ", KS MiRKAT " + fmt("%.3f", ks_mirkat) + ", GMDI zero-coordinate rejection " +
                fmt("%.3f", t1)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "GMD correctness", c1_gmd},
        {2, "KPR equivalence", c2_kpr},
        {3, "full-component unbiasedness", c3_unbiased},
        {4, "LOOCV RMSE trend, Setting I", c4_table1},
        {5, "GMDI calibration and power, Setting I", c5_calibration},
        {6, "structure screens, Setting III", c6_screens},
        {7, "column-kernel robustness, Setting II", c7_setting2},
        {8, "robust GMDI, Setting IV", c8_robust},
        {9, "mixing-weight optimizer vs grid", c9_optimizer},
        {10, "lasso oracles", c10_lasso},
        {11, "null p-value sanity", c11_null},
    };
    std::set<int> selected;
    std::set<int> known_red;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--known-red" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) known_red.insert(std::stoi(tok));
        } else {
            selected.insert(std::stoi(arg));
        }
    }
    int unexpected = 0;
    for (const Criterion& c : all) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s [%d] %s: %s (%.0f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), elapsed(t0));
        std::fflush(stdout);
        if (!v.pass && !known_red.count(c.id)) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
