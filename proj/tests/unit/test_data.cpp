#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pullback/errors.hpp"
#include "pullback/data.hpp"
#include "pullback/rng.hpp"

using namespace pullback;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pullback_test_data";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

// Hand-assembled IDX3 file: count images of rows×cols with pixel = (i + k) % 256.
fs::path make_images(const std::string& name, std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    std::vector<unsigned char> b;
    put_be32(b, 2051);
    put_be32(b, count);
    put_be32(b, rows);
    put_be32(b, cols);
    for (std::uint32_t i = 0; i < count; ++i)
        for (std::uint32_t k = 0; k < rows * cols; ++k) b.push_back(static_cast<unsigned char>((i + k) % 256));
    const fs::path p = scratch(name);
    write_bytes(p, b);
    return p;
}

}  // namespace

TEST_CASE("IDX magic numbers") {
    CHECK(kIdxImageMagic == 2051);
    CHECK(kIdxLabelMagic == 2049);
}

TEST_CASE("load_idx reads a hand-built file") {
    const fs::path img = make_images("a.idx3", 12, 2, 3);
    std::vector<unsigned char> lb;
    put_be32(lb, 2049);
    put_be32(lb, 12);
    for (int i = 0; i < 12; ++i) lb.push_back(static_cast<unsigned char>(i % 10));
    const fs::path lab = scratch("a.idx1");
    write_bytes(lab, lb);

    const Dataset d = load_idx(img, lab);
    CHECK(d.size() == 12);
    CHECK(d.input_dim == 6);
    CHECK(d.samples[1][2] == doctest::Approx(3.0 / 255.0));
    CHECK(d.labels[11] == 1);
    for (const auto& x : d.samples)
        for (double v : x) CHECK((v >= 0.0 && v <= 1.0));

    const Dataset first = load_idx(img, lab, 10);
    CHECK(first.size() == 10);
    CHECK(first.samples[9] == d.samples[9]);
    CHECK(load_idx(img, lab).samples == d.samples);
}

TEST_CASE("load_idx errors") {
    std::vector<unsigned char> b;
    put_be32(b, 2049);
    put_be32(b, 1);
    put_be32(b, 1);
    put_be32(b, 1);
    b.push_back(0);
    const fs::path bad = scratch("bad.idx3");
    write_bytes(bad, b);
    try {
        load_idx(bad);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("0x00000801") != std::string::npos);
    }

    const fs::path img = make_images("t.idx3", 4, 2, 2);
    fs::resize_file(img, fs::file_size(img) - 3);
    try {
        load_idx(img);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("length") != std::string::npos);
    }
    CHECK_THROWS_AS(load_idx(scratch("missing.idx3")), IoError);
}

TEST_CASE("IDX writer round trip") {
    std::vector<DenseVector> s{{0.0, 1.0, 0.5, 0.2}, {1.0, 1.0, 0.0, 0.0}};
    const fs::path p = scratch("rt.idx3");
    write_idx_images(p, s, 2, 2);
    const Dataset d = load_idx(p);
    REQUIRE(d.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(d.samples[i][k] - s[i][k]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("noise-free circle lies on the unit circle of the frame plane") {
    ManifoldSpec spec{ManifoldKind::noisy_circle, 200, 16, 0.0, 5};
    const Dataset d = synth_manifold(spec);
    const DenseMatrix frame = manifold_frame(16, 5);
    for (const auto& x : d.samples) {
        CHECK(norm2(x) == doctest::Approx(1.0).epsilon(1e-10));
        const double a = dot(x, frame.column(0));
        const double b = dot(x, frame.column(1));
        CHECK(std::abs(a * a + b * b - 1.0) < 1e-10);
    }
    spec.radius = 4.0;
    for (const auto& x : synth_manifold(spec).samples) CHECK(norm2(x) == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("manifold frame is orthonormal") {
    const DenseMatrix f = manifold_frame(10, 3);
    CHECK(dot(f.column(0), f.column(0)) == doctest::Approx(1.0));
    CHECK(dot(f.column(1), f.column(1)) == doctest::Approx(1.0));
    CHECK(std::abs(dot(f.column(0), f.column(1))) < 1e-12);
}

TEST_CASE("synthetic data is deterministic and streams differ") {
    ManifoldSpec spec{ManifoldKind::linear_subspace, 50, 8, 0.1, 9};
    CHECK(synth_manifold(spec).samples == synth_manifold(spec).samples);
    ManifoldSpec test = spec;
    test.stream = 1;
    CHECK(synth_manifold(test).samples != synth_manifold(spec).samples);
    CHECK(synth_manifold(test).split == Split::test);
}

TEST_CASE("linear subspace points lie in the frame span") {
    ManifoldSpec spec{ManifoldKind::linear_subspace, 50, 8, 0.0, 9};
    const DenseMatrix f = manifold_frame(8, 9);
    for (const auto& x : synth_manifold(spec).samples) {
        const double a = dot(x, f.column(0));
        const double b = dot(x, f.column(1));
        CHECK(std::abs(squared_norm(x) - a * a - b * b) < 1e-10);
    }
}

TEST_CASE("two blobs are balanced around the origin") {
    ManifoldSpec spec{ManifoldKind::two_blobs, 10000, 4, 0.5, 21};
    const Dataset d = synth_manifold(spec);
    DenseVector mean(4, 0.0);
    for (const auto& x : d.samples)
        for (std::size_t k = 0; k < 4; ++k) mean[k] += x[k] / 10000.0;
    const double bound = 3.0 * 0.5 / std::sqrt(10000.0);
    for (double m : mean) CHECK(std::abs(m) < bound);
    int ones = 0;
    for (int l : d.labels) ones += l;
    CHECK(ones == 5000);
}

TEST_CASE("synthetic generators reject bad parameters") {
    CHECK_THROWS_AS(synth_manifold({ManifoldKind::noisy_circle, 0, 4, 0.0, 1}), InvalidArgument);
    CHECK_THROWS_AS(synth_manifold({ManifoldKind::noisy_circle, 5, 1, 0.0, 1}), InvalidArgument);
    CHECK_THROWS_AS(synth_manifold({ManifoldKind::noisy_circle, 5, 4, -1.0, 1}), InvalidArgument);
    CHECK_THROWS_AS(parse_manifold_kind("torus"), InvalidArgument);
    CHECK(parse_manifold_kind("two-blobs") == ManifoldKind::two_blobs);
}

TEST_CASE("Dataset validate and prefix") {
    Dataset d;
    d.input_dim = 2;
    d.samples = {{1, 2}, {3, 4}, {5, 6}};
    CHECK_NOTHROW(d.validate());
    CHECK(d.prefix(2).size() == 2);
    CHECK(d.prefix(10).size() == 3);
    d.samples.push_back({1});
    CHECK_THROWS_AS(d.validate(), ShapeError);
    d.samples.back() = {NAN, 0};
    CHECK_THROWS_AS(d.validate(), DomainError);
}
