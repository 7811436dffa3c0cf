#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gmdkit/types.hpp"

namespace gmdkit {

using Rng = std::mt19937_64;

// Counter-based stream derivation: each (master, stream) pair yields an
// independent, reproducible generator regardless of evaluation order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);
Rng make_rng(std::uint64_t master, std::uint64_t stream);

Vector standard_normal(Index n, Rng& rng);
Matrix standard_normal(Index rows, Index cols, Rng& rng);

// Uniformly random permutation of 0..m-1 (Fisher-Yates).
std::vector<Index> random_permutation(Index m, Rng& rng);

}  // namespace gmdkit
