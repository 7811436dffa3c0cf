#pragma once

#include <optional>
#include <string>

#include "gmdkit/types.hpp"

namespace gmdkit {

// Sidecar descriptor {rows, cols, role} stored next to a dense CSV.
struct MatrixDescriptor {
    Index rows = 0;
    Index cols = 0;
    std::string role;  // "X" | "H" | "Q" | "y"
};

// Dense CSV, no header, one matrix row per line. NaN/Inf are rejected and
// parse failures carry a 1-based line/column location.
Matrix parse_csv(const std::string& text, const std::string& source = "<memory>");
Matrix read_csv(const std::string& path);

// 17 significant digits, so a write/read round trip is exact.
std::string format_csv(const Matrix& m);
void write_csv(const std::string& path, const Matrix& m);

MatrixDescriptor read_descriptor(const std::string& path);
void write_descriptor(const std::string& path, const MatrixDescriptor& descriptor);

// Reads a CSV and enforces the descriptor shape. When `descriptor_path` is
// empty, "<path>.json" is used if it exists.
Matrix load_matrix(const std::string& path, const std::optional<std::string>& descriptor_path = {});

// Dataset manifest: {"X": path, "H": path, "Q": path, "y": path?}. Relative
// paths resolve against the manifest's directory. Missing H or Q default to
// the identity.
TwoWayDataset load_dataset(const std::string& manifest_path);
TwoWayDataset load_dataset(const std::string& x_path, const std::optional<std::string>& h_path,
                           const std::optional<std::string>& q_path,
                           const std::optional<std::string>& y_path);

}  // namespace gmdkit
