#include "gmdkit/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace gmdkit {

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string location(const std::string& source, std::size_t line, std::size_t col) {
    return source + ":" + std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

Matrix parse_csv(const std::string& text, const std::string& source) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + start, end - start);
        ++line_no;
        start = end + 1;
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        std::vector<double> values;
        std::size_t col_no = 0;
        std::size_t field_start = 0;
        while (true) {
            std::size_t comma = line.find(',', field_start);
            std::string_view field = trim(line.substr(field_start, comma == std::string_view::npos
                                                                        ? std::string_view::npos
                                                                        : comma - field_start));
            ++col_no;
            double value = 0.0;
            if (!field.empty() && field.front() == '+') field.remove_prefix(1);
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
            if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
                fail(ErrorCode::io, "parse error at " + location(source, line_no, col_no) + ": '" +
                                        std::string(field) + "' is not a number");
            }
            if (!std::isfinite(value)) {
                fail(ErrorCode::io, "non-finite value at " + location(source, line_no, col_no));
            }
            values.push_back(value);
            if (comma == std::string_view::npos) break;
            field_start = comma + 1;
        }
        if (!rows.empty() && values.size() != rows.front().size()) {
            fail(ErrorCode::io, source + ": ragged row " + std::to_string(rows.size() + 1) + " (line " +
                                    std::to_string(line_no) + ") has " + std::to_string(values.size()) +
                                    " fields, expected " + std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(values));
        if (end == text.size()) break;
    }
    if (rows.empty()) fail(ErrorCode::io, source + ": no data");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

Matrix read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

std::string format_csv(const Matrix& m) {
    std::string out;
    char buf[64];
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out.push_back(',');
            const int len = std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out.append(buf, static_cast<std::size_t>(len));
        }
        out.push_back('\n');
    }
    return out;
}

void write_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
    out << format_csv(m);
}

MatrixDescriptor read_descriptor(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::io, path + ": invalid JSON descriptor: " + e.what());
    }
    MatrixDescriptor d;
    try {
        d.rows = j.at("rows").get<Index>();
        d.cols = j.at("cols").get<Index>();
        d.role = j.at("role").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::io, path + ": descriptor needs rows, cols, role: " + e.what());
    }
    if (d.role != "X" && d.role != "H" && d.role != "Q" && d.role != "y") {
        fail(ErrorCode::io, path + ": unknown role '" + d.role + "'");
    }
    return d;
}

void write_descriptor(const std::string& path, const MatrixDescriptor& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot write '" + path + "'");
    out << nlohmann::json{{"rows", d.rows}, {"cols", d.cols}, {"role", d.role}}.dump() << "\n";
}

Matrix load_matrix(const std::string& path, const std::optional<std::string>& descriptor_path) {
    Matrix m = read_csv(path);
    std::optional<std::string> desc = descriptor_path;
    if (!desc && std::filesystem::exists(path + ".json")) desc = path + ".json";
    if (desc) {
        const MatrixDescriptor d = read_descriptor(*desc);
        if (d.rows != m.rows() || d.cols != m.cols()) {
            fail(ErrorCode::dimension_mismatch, path + ": descriptor expects " +
                                                    shape_string(d.rows, d.cols) + ", file has " +
                                                    shape_string(m.rows(), m.cols()));
        }
    }
    return m;
}

TwoWayDataset load_dataset(const std::string& x_path, const std::optional<std::string>& h_path,
                           const std::optional<std::string>& q_path,
                           const std::optional<std::string>& y_path) {
    TwoWayDataset data;
    data.x = load_matrix(x_path);
    data.h = h_path ? load_matrix(*h_path) : Matrix::Identity(data.x.rows(), data.x.rows());
    data.q = q_path ? load_matrix(*q_path) : Matrix::Identity(data.x.cols(), data.x.cols());
    if (y_path) {
        const Matrix y = load_matrix(*y_path);
        if (y.cols() == 1) {
            data.y = y.col(0);
        } else if (y.rows() == 1) {
            data.y = y.row(0).transpose();
        } else {
            fail(ErrorCode::dimension_mismatch,
                 *y_path + ": y must be a vector, got " + shape_string(y.rows(), y.cols()));
        }
    }
    return data;
}

TwoWayDataset load_dataset(const std::string& manifest_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::io, manifest_path + ": invalid JSON manifest: " + e.what());
    }
    const auto base = std::filesystem::path(manifest_path).parent_path();
    auto resolve = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key)) return std::nullopt;
        std::filesystem::path p = j.at(key).get<std::string>();
        if (p.is_relative()) p = base / p;
        return p.string();
    };
    const auto x = resolve("X");
    if (!x) fail(ErrorCode::io, manifest_path + ": manifest has no X entry");
    return load_dataset(*x, resolve("H"), resolve("Q"), resolve("y"));
}

}  // namespace gmdkit
