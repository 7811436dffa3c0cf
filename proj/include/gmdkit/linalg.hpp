#pragma once

#include <optional>
#include <string_view>

#include "gmdkit/types.hpp"

namespace gmdkit {

// Cholesky factor of a kernel: K + jitter * I = lower * lower^T.
struct KernelFactor {
    Matrix lower;
    double jitter = 0.0;

    bool jittered() const { return jitter > 0.0; }
    Index dim() const { return lower.rows(); }
};

// Relative ridge added once when a kernel fails Cholesky.
inline constexpr double kJitterScale = 1e-10;

// Attempts Cholesky; on failure adds kJitterScale * tr(K)/dim to the
// diagonal once, then throws not_positive_definite.
KernelFactor factor_kernel(const Matrix& k, std::string_view name);

// Symmetry to 1e-10 (relative, entrywise) and smallest eigenvalue
// > 1e-12 * largest. This is the full O(m^3) check used on user input.
void validate_kernel(const Matrix& k, std::string_view name);

// Shapes, finiteness, and both kernels.
void validate_dataset(const TwoWayDataset& data);

// H-weighted column means 1^T H x_j / 1^T H 1.
Vector weighted_column_means(const Matrix& x, const Matrix& h);
double weighted_mean(const Vector& y, const Matrix& h);

// Shifts y and every column of X so that 1^T H y = 0 and 1^T H X = 0.
TwoWayDataset center_hq(const TwoWayDataset& data);

// Generalized matrix decomposition X = U S V^T with U^T H U = I and
// V^T Q V = I, computed by Cholesky whitening followed by an SVD of
// L_H^T X L_Q. Components are ordered by nonincreasing sigma and each column
// of V is sign-normalized so its largest-magnitude entry of the whitened
// vector is positive.
struct GmdFactors {
    Matrix u;
    Vector s;
    Matrix v;

    Index rank() const { return s.size(); }
};

enum class GmdAlgorithm {
    svd,   // bidiagonal SVD of the whitened matrix (default)
    gram,  // symmetric eigensolver on the smaller Gram matrix; faster, used for CV refits
};

struct GmdOptions {
    std::optional<Index> rank;
    double rank_tol = 1e-12;
    GmdAlgorithm algorithm = GmdAlgorithm::svd;
};

GmdFactors gmd(const TwoWayDataset& data, const GmdOptions& options = {});
GmdFactors gmd(const Matrix& x, const Matrix& h, const Matrix& q, const GmdOptions& options = {});
GmdFactors gmd(const Matrix& x, const KernelFactor& h_factor, const KernelFactor& q_factor,
               const Matrix& q, const GmdOptions& options = {});

struct Standardization {
    TwoWayDataset data;
    Vector scales;  // x_j <- x_j / scales(j)
};

// Scales each column to ||x_j||_H^2 = n. Zero-norm columns are an error.
Standardization standardize_columns(const TwoWayDataset& data);

// ||(X D)_j||_H / sqrt(n) for each column of the rotated design X D.
Vector rotated_column_scales(const Matrix& x, const Matrix& h, const Matrix& d);

// sqrt(tr(M^T H M Q)).
double hq_norm(const Matrix& m, const Matrix& h, const Matrix& q);

struct SymmetricEigen {
    Vector values;  // descending
    Matrix vectors;
};

// Eigendecomposition with eigenvalues sorted in descending order and each
// eigenvector's first non-negligible entry made positive.
SymmetricEigen symmetric_eigen(const Matrix& k);

// Inverse of an SPD matrix via its (possibly jittered) Cholesky factor.
Matrix spd_inverse(const Matrix& k, std::string_view name);

// Largest eigenvalue of a symmetric matrix.
double spectral_norm_symmetric(const Matrix& k);

// Principal submatrix / subvector with one index removed.
Matrix drop_index(const Matrix& m, Index i, bool rows, bool cols);
Vector drop_index(const Vector& v, Index i);

}  // namespace gmdkit
