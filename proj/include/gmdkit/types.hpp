#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gmdkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
    invalid_argument = 1,
    dimension_mismatch,
    not_positive_definite,
    numerical,
    convergence,
    io,
};

// All library failures are reported through this exception; the C API maps
// `code()` onto its status enum.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

std::string shape_string(Index rows, Index cols);

// Two-way structured data: design X with a row kernel H (n x n) and a
// column kernel Q (p x p).
struct TwoWayDataset {
    Matrix x;
    Matrix h;
    Matrix q;
    std::optional<Vector> y;

    Index n() const { return x.rows(); }
    Index p() const { return x.cols(); }
    const Vector& response() const;
};

}  // namespace gmdkit
