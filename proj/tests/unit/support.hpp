#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "gmdkit/random.hpp"
#include "gmdkit/types.hpp"

namespace gmdtest {

using gmdkit::Index;
using gmdkit::Matrix;
using gmdkit::Rng;
using gmdkit::Vector;

inline Matrix random_spd(Index m, Rng& rng, double ridge = 0.5) {
    const Matrix a = gmdkit::standard_normal(m, m, rng);
    Matrix k = a * a.transpose() / static_cast<double>(m);
    k.diagonal().array() += ridge;
    return 0.5 * (k + k.transpose());
}

inline gmdkit::TwoWayDataset random_dataset(Index n, Index p, Rng& rng, bool identity_kernels = false) {
    gmdkit::TwoWayDataset d;
    d.x = gmdkit::standard_normal(n, p, rng);
    d.h = identity_kernels ? Matrix::Identity(n, n) : random_spd(n, rng);
    d.q = identity_kernels ? Matrix::Identity(p, p) : random_spd(p, rng);
    d.y = gmdkit::standard_normal(n, rng);
    return d;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
    const double scale = std::max(1.0, b.norm());
    return (a - b).norm() / scale;
}

}  // namespace gmdtest
