#include "gmdkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gmdkit {

namespace {

void require_square(const Matrix& k, std::string_view name) {
    if (k.rows() != k.cols() || k.rows() == 0) {
        fail(ErrorCode::dimension_mismatch,
             std::string(name) + " must be a non-empty square matrix, got " +
                 shape_string(k.rows(), k.cols()));
    }
}

bool cholesky_ok(const Eigen::LLT<Matrix>& llt, const Matrix& k) {
    if (llt.info() != Eigen::Success) return false;
    const auto diag = llt.matrixLLT().diagonal();
    const double max_k = k.diagonal().cwiseAbs().maxCoeff();
    if (!(max_k > 0.0)) return false;
    // A factorization whose smallest pivot is at rounding level carries no
    // information about the null directions; treat it as a failure.
    return diag.minCoeff() > 0.0 && diag.array().square().minCoeff() > 1e-14 * max_k;
}

void flip_to_positive(Matrix& basis, Index col, Matrix* partner) {
    Index arg = 0;
    basis.col(col).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, col) < 0.0) {
        basis.col(col) *= -1.0;
        if (partner) partner->col(col) *= -1.0;
    }
}

}  // namespace

KernelFactor factor_kernel(const Matrix& k, std::string_view name) {
    require_square(k, name);
    if (!k.allFinite()) fail(ErrorCode::invalid_argument, std::string(name) + " contains NaN or Inf");
    Eigen::LLT<Matrix> llt(k);
    if (cholesky_ok(llt, k)) return {llt.matrixL(), 0.0};

    const double jitter = kJitterScale * std::max(k.trace(), 0.0) / static_cast<double>(k.rows());
    if (jitter > 0.0) {
        Matrix ridged = k;
        ridged.diagonal().array() += jitter;
        Eigen::LLT<Matrix> retry(ridged);
        if (cholesky_ok(retry, ridged)) return {retry.matrixL(), jitter};
    }
    fail(ErrorCode::not_positive_definite, std::string(name) + ": kernel not positive definite");
}

void validate_kernel(const Matrix& k, std::string_view name) {
    require_square(k, name);
    if (!k.allFinite()) fail(ErrorCode::invalid_argument, std::string(name) + " contains NaN or Inf");
    const double scale = k.cwiseAbs().maxCoeff();
    for (Index j = 0; j < k.cols(); ++j) {
        for (Index i = j + 1; i < k.rows(); ++i) {
            const double a = k(i, j);
            const double b = k(j, i);
            if (std::abs(a - b) > 1e-10 * std::max(std::abs(a), std::abs(b)) + 1e-14 * scale) {
                fail(ErrorCode::invalid_argument,
                     std::string(name) + " is not symmetric at (" + std::to_string(i + 1) + "," +
                         std::to_string(j + 1) + ")");
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(k, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(k.rows() - 1);
    if (hi <= 0.0) fail(ErrorCode::not_positive_definite, std::string(name) + ": kernel not positive definite");
    if (lo > 1e-12 * hi) return;
    // Semi-definite kernels are accepted when the one-time ridge repairs them.
    const double jitter = kJitterScale * k.trace() / static_cast<double>(k.rows());
    if (lo + jitter <= 1e-12 * (hi + jitter)) {
        fail(ErrorCode::not_positive_definite, std::string(name) + ": kernel not positive definite");
    }
}

void validate_dataset(const TwoWayDataset& data) {
    if (data.x.size() == 0) fail(ErrorCode::invalid_argument, "design matrix X is empty");
    if (!data.x.allFinite()) fail(ErrorCode::invalid_argument, "X contains NaN or Inf");
    const Index n = data.n();
    const Index p = data.p();
    if (data.h.rows() != n || data.h.cols() != n) {
        fail(ErrorCode::dimension_mismatch, "H: expected " + shape_string(n, n) + ", got " +
                                                shape_string(data.h.rows(), data.h.cols()));
    }
    if (data.q.rows() != p || data.q.cols() != p) {
        fail(ErrorCode::dimension_mismatch, "Q: expected " + shape_string(p, p) + ", got " +
                                                shape_string(data.q.rows(), data.q.cols()));
    }
    if (data.y) {
        if (data.y->size() != n) {
            fail(ErrorCode::dimension_mismatch, "y: expected " + shape_string(n, 1) + ", got " +
                                                    shape_string(data.y->size(), 1));
        }
        if (!data.y->allFinite()) fail(ErrorCode::invalid_argument, "y contains NaN or Inf");
    }
    validate_kernel(data.h, "H");
    validate_kernel(data.q, "Q");
}

Vector weighted_column_means(const Matrix& x, const Matrix& h) {
    const Vector h1 = h * Vector::Ones(h.rows());
    const double denom = h1.sum();
    if (!(denom > 0.0)) fail(ErrorCode::not_positive_definite, "H: kernel not positive definite");
    return (x.transpose() * h1) / denom;
}

double weighted_mean(const Vector& y, const Matrix& h) {
    const Vector h1 = h * Vector::Ones(h.rows());
    const double denom = h1.sum();
    if (!(denom > 0.0)) fail(ErrorCode::not_positive_definite, "H: kernel not positive definite");
    return h1.dot(y) / denom;
}

TwoWayDataset center_hq(const TwoWayDataset& data) {
    if (data.h.rows() != data.n() || data.h.cols() != data.n()) {
        fail(ErrorCode::dimension_mismatch, "H: expected " + shape_string(data.n(), data.n()) +
                                                ", got " + shape_string(data.h.rows(), data.h.cols()));
    }
    factor_kernel(data.h, "H");
    TwoWayDataset out = data;
    const Vector means = weighted_column_means(data.x, data.h);
    out.x.rowwise() -= means.transpose();
    if (data.y) out.y = (data.y->array() - weighted_mean(*data.y, data.h)).matrix();
    return out;
}

GmdFactors gmd(const TwoWayDataset& data, const GmdOptions& options) {
    return gmd(data.x, data.h, data.q, options);
}

GmdFactors gmd(const Matrix& x, const Matrix& h, const Matrix& q, const GmdOptions& options) {
    if (x.size() == 0) fail(ErrorCode::invalid_argument, "design matrix X is empty");
    if (h.rows() != x.rows() || h.cols() != x.rows()) {
        fail(ErrorCode::dimension_mismatch, "H: expected " + shape_string(x.rows(), x.rows()) +
                                                ", got " + shape_string(h.rows(), h.cols()));
    }
    if (q.rows() != x.cols() || q.cols() != x.cols()) {
        fail(ErrorCode::dimension_mismatch, "Q: expected " + shape_string(x.cols(), x.cols()) +
                                                ", got " + shape_string(q.rows(), q.cols()));
    }
    return gmd(x, factor_kernel(h, "H"), factor_kernel(q, "Q"), q, options);
}

GmdFactors gmd(const Matrix& x, const KernelFactor& h_factor, const KernelFactor& q_factor,
               const Matrix& /*q*/, const GmdOptions& options) {
    const Index n = x.rows();
    const Index p = x.cols();
    if (x.size() == 0) fail(ErrorCode::invalid_argument, "design matrix X is empty");
    if (h_factor.dim() != n || q_factor.dim() != p) {
        fail(ErrorCode::dimension_mismatch, "kernel factors do not match X " + shape_string(n, p));
    }
    if (options.rank && (*options.rank < 1 || *options.rank > std::min(n, p))) {
        fail(ErrorCode::invalid_argument,
             "rank request " + std::to_string(*options.rank) + " outside [1, min(n,p)=" +
                 std::to_string(std::min(n, p)) + "]");
    }

    const Matrix xq = x * q_factor.lower;  // X L_Q
    const Matrix whitened = h_factor.lower.transpose() * xq;

    Matrix u_white;
    Matrix v_white;
    Vector sigma;
    double tol = options.rank_tol;
    if (options.algorithm == GmdAlgorithm::svd) {
        Eigen::BDCSVD<Matrix> svd(whitened, Eigen::ComputeThinU | Eigen::ComputeThinV);
        sigma = svd.singularValues();
        u_white = svd.matrixU();
        v_white = svd.matrixV();
    } else {
        // Eigenvalues of the Gram matrix carry absolute error ~eps * sigma_1^2,
        // so singular values below ~1e-7 sigma_1 are not resolved.
        tol = std::max(tol, 1e-7);
        const bool wide = n <= p;
        const Matrix gram = wide ? Matrix(whitened * whitened.transpose())
                                 : Matrix(whitened.transpose() * whitened);
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
        const Index m = gram.rows();
        sigma.resize(m);
        Matrix basis(m, m);
        for (Index k = 0; k < m; ++k) {
            sigma(k) = std::sqrt(std::max(es.eigenvalues()(m - 1 - k), 0.0));
            basis.col(k) = es.eigenvectors().col(m - 1 - k);
        }
        if (wide) {
            u_white = basis;
            v_white.resize(p, m);
        } else {
            v_white = basis;
            u_white.resize(n, m);
        }
        // The complementary side is filled below once the rank is known.
        const Index keep_est = (sigma.array() > tol * std::max(sigma(0), 0.0)).count();
        for (Index k = 0; k < keep_est; ++k) {
            if (wide)
                v_white.col(k) = whitened.transpose() * u_white.col(k) / sigma(k);
            else
                u_white.col(k) = whitened * v_white.col(k) / sigma(k);
        }
    }

    if (sigma.size() == 0 || !(sigma(0) > 0.0)) {
        fail(ErrorCode::numerical, "X has zero (H,Q)-norm; nothing to decompose");
    }
    Index rank = (sigma.array() > tol * sigma(0)).count();
    if (options.rank) rank = std::min(rank, *options.rank);

    GmdFactors out;
    out.s = sigma.head(rank);
    Matrix vw = v_white.leftCols(rank);
    Matrix uw = u_white.leftCols(rank);
    for (Index k = 0; k < rank; ++k) flip_to_positive(vw, k, &uw);

    out.v = q_factor.lower.transpose().triangularView<Eigen::Upper>().solve(vw);
    out.u = (xq * vw) * out.s.cwiseInverse().asDiagonal();
    return out;
}

Standardization standardize_columns(const TwoWayDataset& data) {
    const Index n = data.n();
    const Matrix hx = data.h * data.x;
    Vector scales(data.p());
    for (Index j = 0; j < data.p(); ++j) {
        const double norm2 = data.x.col(j).dot(hx.col(j));
        scales(j) = std::sqrt(std::max(norm2, 0.0) / static_cast<double>(n));
    }
    const double largest = scales.size() ? scales.maxCoeff() : 0.0;
    for (Index j = 0; j < data.p(); ++j) {
        if (!(scales(j) > 1e-12 * largest) || !std::isfinite(scales(j))) {
            fail(ErrorCode::invalid_argument,
                 "column " + std::to_string(j + 1) + " has zero H-norm and cannot be standardized");
        }
    }
    Standardization out{data, scales};
    out.data.x = data.x * scales.cwiseInverse().asDiagonal();
    return out;
}

Vector rotated_column_scales(const Matrix& x, const Matrix& h, const Matrix& d) {
    const Matrix z = x * d;
    const Matrix hz = h * z;
    Vector scales(z.cols());
    for (Index j = 0; j < z.cols(); ++j) {
        scales(j) = std::sqrt(std::max(z.col(j).dot(hz.col(j)), 0.0) / static_cast<double>(x.rows()));
    }
    return scales;
}

double hq_norm(const Matrix& m, const Matrix& h, const Matrix& q) {
    if (h.rows() != m.rows() || h.cols() != m.rows() || q.rows() != m.cols() || q.cols() != m.cols()) {
        fail(ErrorCode::dimension_mismatch,
             "hq_norm: M is " + shape_string(m.rows(), m.cols()) + ", H is " +
                 shape_string(h.rows(), h.cols()) + ", Q is " + shape_string(q.rows(), q.cols()));
    }
    const double tr = ((h * m).array() * (m * q).array()).sum();
    return std::sqrt(std::max(tr, 0.0));
}

SymmetricEigen symmetric_eigen(const Matrix& k) {
    require_square(k, "matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    if (es.info() != Eigen::Success) fail(ErrorCode::numerical, "symmetric eigensolver failed");
    const Index m = k.rows();
    SymmetricEigen out;
    out.values = es.eigenvalues().reverse();
    out.vectors = es.eigenvectors().rowwise().reverse();
    for (Index c = 0; c < m; ++c) {
        const double big = out.vectors.col(c).cwiseAbs().maxCoeff();
        for (Index r = 0; r < m; ++r) {
            if (std::abs(out.vectors(r, c)) > 1e-10 * big) {
                if (out.vectors(r, c) < 0.0) out.vectors.col(c) *= -1.0;
                break;
            }
        }
    }
    return out;
}

Matrix spd_inverse(const Matrix& k, std::string_view name) {
    const KernelFactor f = factor_kernel(k, name);
    Matrix inv = Matrix::Identity(k.rows(), k.cols());
    f.lower.triangularView<Eigen::Lower>().solveInPlace(inv);
    f.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
    return 0.5 * (inv + inv.transpose());
}

double spectral_norm_symmetric(const Matrix& k) {
    require_square(k, "matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> es(k, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix drop_index(const Matrix& m, Index i, bool rows, bool cols) {
    const Index r = rows ? m.rows() - 1 : m.rows();
    const Index c = cols ? m.cols() - 1 : m.cols();
    Matrix out(r, c);
    for (Index cj = 0, sj = 0; sj < m.cols(); ++sj) {
        if (cols && sj == i) continue;
        for (Index ri = 0, si = 0; si < m.rows(); ++si) {
            if (rows && si == i) continue;
            out(ri++, cj) = m(si, sj);
        }
        ++cj;
    }
    return out;
}

Vector drop_index(const Vector& v, Index i) {
    Vector out(v.size() - 1);
    out.head(i) = v.head(i);
    out.tail(v.size() - 1 - i) = v.tail(v.size() - 1 - i);
    return out;
}

}  // namespace gmdkit
