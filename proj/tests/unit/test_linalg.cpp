#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pullback/errors.hpp"
#include "pullback/linalg.hpp"
#include "pullback/rng.hpp"

using namespace pullback;

namespace {

double residual(const DenseMatrix& g, const EigenDecomposition& e) {
    // ‖GV − VΛ‖_F / ‖G‖_F over the stored eigenvectors.
    double s = 0.0;
    for (std::size_t k = 0; k < e.vector_count(); ++k) {
        const DenseVector v = e.vector(k);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double gv = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) gv += g(i, j) * v[j];
            const double d = gv - e.values[k] * v[i];
            s += d * d;
        }
    }
    return std::sqrt(s) / std::max(oracle::frob(g), 1e-30);
}

double orthonormality_error(const EigenDecomposition& e) {
    double worst = 0.0;
    for (std::size_t a = 0; a < e.vector_count(); ++a)
        for (std::size_t b = 0; b < e.vector_count(); ++b) {
            const double d = dot(e.vector(a), e.vector(b));
            worst = std::max(worst, std::abs(d - (a == b ? 1.0 : 0.0)));
        }
    return worst;
}

}  // namespace

TEST_CASE("matrix construction and element access") {
    DenseMatrix m{{1, 2, 3}, {4, 5, 6}};
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 6);
    CHECK(m.transposed()(2, 1) == 6);
    CHECK(m.column(1) == DenseVector{2, 5});
    CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS((DenseMatrix{{1, 2}, {3}}), ShapeError);
    CHECK(DenseMatrix::identity(3).trace() == 3.0);
}

TEST_CASE("products agree with the triple loop") {
    RngState rng(5);
    const DenseMatrix a = oracle::random_matrix(4, 7, rng);
    const DenseMatrix b = oracle::random_matrix(7, 3, rng);
    CHECK(oracle::frob_diff(matmul(a, b), oracle::naive_matmul(a, b)) < 1e-12);
    const DenseMatrix c = oracle::random_matrix(4, 5, rng);
    CHECK(oracle::frob_diff(matmul_tn(a, c), oracle::naive_matmul(oracle::naive_transpose(a), c)) < 1e-12);
    CHECK(oracle::frob_diff(gram_rows(a), oracle::naive_matmul(a, oracle::naive_transpose(a))) < 1e-12);
    CHECK(oracle::frob_diff(gram_cols(a), oracle::naive_matmul(oracle::naive_transpose(a), a)) < 1e-12);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
    const DenseMatrix s = vstack(a, a);
    CHECK(s.rows() == 8);
    CHECK_THROWS_AS(vstack(a, b), ShapeError);
}

TEST_CASE("vector helpers") {
    const DenseVector x{3, 4};
    CHECK(norm2(x) == doctest::Approx(5.0));
    CHECK(squared_norm(x) == 25.0);
    CHECK(dot(x, DenseVector{1, 1}) == 7.0);
    CHECK(axpy(2.0, x, DenseVector{1, 1}) == DenseVector{7, 9});
    CHECK(subtract(x, DenseVector{1, 1}) == DenseVector{2, 3});
    CHECK_THROWS_AS(dot(x, DenseVector{1}), ShapeError);
    const DenseMatrix m{{1, 2}, {3, 4}};
    CHECK(matvec(m, x) == DenseVector{11, 25});
    CHECK(matvec_t(m, x) == DenseVector{15, 22});
}

TEST_CASE("sym_eig on diagonal input") {
    const EigenDecomposition e = sym_eig(DenseMatrix{{3, 0}, {0, 1}});
    CHECK(e.values == DenseVector{3, 1});
    CHECK(std::abs(e.vector(0)[0]) == doctest::Approx(1.0));
    CHECK(std::abs(e.vector(1)[1]) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig on [[2,1],[1,2]]") {
    const EigenDecomposition e = sym_eig(DenseMatrix{{2, 1}, {1, 2}});
    CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-14));
    const double r = 1.0 / std::sqrt(2.0);
    const DenseVector v0 = e.vector(0);
    const DenseVector v1 = e.vector(1);
    CHECK(std::abs(v0[0]) == doctest::Approx(r));
    CHECK(v0[0] * v0[1] > 0.0);
    CHECK(std::abs(v1[0]) == doctest::Approx(r));
    CHECK(v1[0] * v1[1] < 0.0);
}

TEST_CASE("sym_eig on the identity") {
    const DenseMatrix id = DenseMatrix::identity(6);
    const EigenDecomposition e = sym_eig(id);
    for (double v : e.values) CHECK(v == doctest::Approx(1.0));
    CHECK(residual(id, e) < 1e-12);
}

TEST_CASE("sym_eig rejects bad input") {
    CHECK_THROWS_AS(sym_eig(DenseMatrix{{1, 2}, {0, 1}}), SymmetryError);
    CHECK_THROWS_AS(sym_eig(DenseMatrix{{1, NAN}, {NAN, 1}}), InvalidArgument);
    CHECK_THROWS_AS(sym_eig(DenseMatrix(2, 3)), ShapeError);
}

TEST_CASE("sym_eig properties over random PSD matrices") {
    RngState rng(11);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + rng.uniform_index(40);
        const std::size_t rank = 1 + rng.uniform_index(n);
        const DenseMatrix g = oracle::random_psd(n, rank, rng);
        const EigenDecomposition e = sym_eig(g);
        CHECK(residual(g, e) < 1e-8);
        CHECK(orthonormality_error(e) < 1e-10);
        for (std::size_t k = 1; k < e.values.size(); ++k) CHECK(e.values[k] <= e.values[k - 1]);
        double sum = 0.0;
        for (double v : e.values) sum += v;
        CHECK(std::abs(sum - g.trace()) <= 1e-8 * std::max(1.0, std::abs(g.trace())));
        for (double v : e.values) CHECK(v >= -1e-10 * e.values[0]);
    }
}

TEST_CASE("gram_eig on a single row") {
    const EigenDecomposition e = gram_eig(DenseMatrix{{1, 0, 0}});
    CHECK(e.values == DenseVector{1, 0, 0});
    REQUIRE(e.vector_count() == 1);
    CHECK(e.vector(0)[0] == doctest::Approx(1.0));
}

TEST_CASE("gram_eig of the zero map") {
    const EigenDecomposition e = gram_eig(DenseMatrix(3, 5));
    CHECK(e.values.size() == 5);
    for (double v : e.values) CHECK(v == 0.0);
    CHECK(e.vector_count() == 0);
}

TEST_CASE("gram_eig contract") { CHECK_THROWS_AS(gram_eig(DenseMatrix(4, 3)), ContractError); }

TEST_CASE("gram_eig matches sym_eig for a 2x784 factor") {
    RngState rng(3);
    const DenseMatrix f = oracle::random_matrix(2, 784, rng);
    const EigenDecomposition g = gram_eig(f);
    const DenseMatrix full = oracle::naive_matmul(oracle::naive_transpose(f), f);
    const EigenDecomposition d = sym_eig(full);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(std::abs(g.values[k] - d.values[k]) < 1e-8 * d.values[0]);
        CHECK(std::abs(std::abs(dot(g.vector(k), d.vector(k))) - 1.0) < 1e-8);
    }
    for (std::size_t k = 2; k < 784; ++k) CHECK(g.values[k] == 0.0);
}

TEST_CASE("gram_eig agrees with sym_eig on random factors") {
    RngState rng(17);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = 1 + rng.uniform_index(64);
        const std::size_t m = 1 + rng.uniform_index(std::min<std::size_t>(8, n));
        const DenseMatrix f = oracle::random_matrix(m, n, rng);
        const EigenDecomposition g = gram_eig(f);
        const DenseMatrix full = oracle::naive_matmul(oracle::naive_transpose(f), f);
        const EigenDecomposition d = sym_eig(full);
        REQUIRE(g.values.size() == n);
        for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(g.values[k] - d.values[k]) < 1e-8);
        CHECK(residual(full, g) < 1e-8);
        CHECK(orthonormality_error(g) < 1e-10);
    }
}

TEST_CASE("clamp_psd") {
    EigenDecomposition e;
    e.values = {2.0, -1e-12};
    clamp_psd(e);
    CHECK(e.values[1] == 0.0);
    e.values = {2.0, -1e-3};
    CHECK_THROWS_AS(clamp_psd(e), NumericalError);
}
