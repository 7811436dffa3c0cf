#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gmdkit/matrix_io.hpp"
#include "support.hpp"

using namespace gmdkit;
using namespace gmdtest;

namespace {

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "gmdkit_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("parse CSV") {
    const Matrix m = parse_csv("1,2\n3,4\n");
    CHECK(m == (Matrix(2, 2) << 1, 2, 3, 4).finished());
    CHECK_THROWS_WITH_AS(parse_csv("1,2\n3\n"), doctest::Contains("row 2"), Error);
    CHECK_THROWS_AS(parse_csv("1,nan\n"), Error);
    CHECK_THROWS_AS(parse_csv("1,inf\n"), Error);
    CHECK_THROWS_WITH_AS(parse_csv("1,2\n3,x\n"), doctest::Contains(":2:2"), Error);
}

TEST_CASE("CSV round trip is exact") {
    Rng rng(1);
    const Matrix m = standard_normal(5, 4, rng) * 1e-3;
    CHECK(parse_csv(format_csv(m)) == m);
    const auto path = (temp_dir() / "m.csv").string();
    write_csv(path, m);
    CHECK(read_csv(path) == m);
}

TEST_CASE("descriptors and manifests") {
    const auto dir = temp_dir();
    const Matrix x = Matrix::Identity(3, 2);
    write_csv((dir / "X.csv").string(), x);
    write_descriptor((dir / "X.csv.json").string(), {3, 2, "X"});
    CHECK(load_matrix((dir / "X.csv").string()) == x);
    write_descriptor((dir / "X.csv.json").string(), {2, 2, "X"});
    CHECK_THROWS_AS(load_matrix((dir / "X.csv").string()), Error);
    std::filesystem::remove(dir / "X.csv.json");

    write_csv((dir / "y.csv").string(), Matrix::Ones(3, 1));
    {
        std::ofstream out(dir / "manifest.json");
        out << R"({"X": "X.csv", "y": "y.csv"})";
    }
    const TwoWayDataset d = load_dataset((dir / "manifest.json").string());
    CHECK(d.h == Matrix::Identity(3, 3));
    CHECK(d.q == Matrix::Identity(2, 2));
    CHECK(d.y->size() == 3);
    CHECK_THROWS_AS(read_csv((dir / "missing.csv").string()), Error);
}
