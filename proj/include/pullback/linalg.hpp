#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace pullback {

using DenseVector = std::vector<double>;

// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    DenseVector column(std::size_t c) const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    DenseMatrix transposed() const;
    double frobenius_norm() const;
    double trace() const;
    bool all_finite() const;

    DenseMatrix& operator+=(const DenseMatrix& other);
    DenseMatrix& operator-=(const DenseMatrix& other);
    DenseMatrix& operator*=(double s);

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// aᵀ·b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a·aᵀ, symmetric by construction.
DenseMatrix gram_rows(const DenseMatrix& a);
// aᵀ·a, symmetric by construction.
DenseMatrix gram_cols(const DenseMatrix& a);
// Stacks a on top of b; column counts must agree.
DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b);

DenseVector matvec(const DenseMatrix& a, std::span<const double> x);
DenseVector matvec_t(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_norm(std::span<const double> a);
DenseVector axpy(double alpha, std::span<const double> x, std::span<const double> y);
DenseVector subtract(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);

// Eigenpairs sorted by non-increasing eigenvalue. `vectors` holds one
// orthonormal column per stored eigenvector; it may have fewer columns than
// there are eigenvalues (see gram_eig).
struct EigenDecomposition {
    DenseVector values;
    DenseMatrix vectors;

    std::size_t dimension() const noexcept { return values.size(); }
    std::size_t vector_count() const noexcept { return vectors.cols(); }
    DenseVector vector(std::size_t k) const { return vectors.column(k); }
};

// Cyclic Jacobi. Throws SymmetryError for inputs asymmetric beyond 1e-10
// relative, InvalidArgument for non-finite entries.
EigenDecomposition sym_eig(const DenseMatrix& g);

// Eigendecomposition of FᵀF (n×n) through the m×m matrix F·Fᵀ, m ≤ n.
// Eigenvalues below the numerical cutoff get no eigenvector; the trailing
// n−m eigenvalues are exactly zero.
EigenDecomposition gram_eig(const DenseMatrix& f);

// Clamps round-off negatives of a theoretically PSD spectrum to zero.
// Values below −1e-10·max(1, |λ|max) raise NumericalError.
void clamp_psd(EigenDecomposition& eig);

}  // namespace pullback
