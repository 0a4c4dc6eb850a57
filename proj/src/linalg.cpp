#include "pullback/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pullback/errors.hpp"

namespace pullback {

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

void require_length(std::size_t got, std::size_t want, const char* op) {
    if (got != want) {
        throw ShapeError(std::string(op) + ": expected length " + std::to_string(want) + ", got " +
                         std::to_string(got));
    }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_length(data_.size(), rows * cols, "DenseMatrix");
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require_length(r.size(), cols_, "DenseMatrix");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

DenseVector DenseMatrix::column(std::size_t c) const {
    DenseVector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double DenseMatrix::frobenius_norm() const { return norm2(data_); }

double DenseMatrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

bool DenseMatrix::all_finite() const { return pullback::all_finite(data_); }

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
    DenseMatrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

DenseMatrix gram_rows(const DenseMatrix& a) {
    DenseMatrix out(a.rows(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i; j < a.rows(); ++j) {
            const double v = dot(a.row(i), a.row(j));
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

DenseMatrix gram_cols(const DenseMatrix& a) {
    DenseMatrix out = matmul_tn(a, a);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = i + 1; j < out.cols(); ++j) out(j, i) = out(i, j);
    return out;
}

DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("vstack: column counts differ");
    std::vector<double> data;
    data.reserve((a.rows() + b.rows()) * a.cols());
    data.insert(data.end(), a.data().begin(), a.data().end());
    data.insert(data.end(), b.data().begin(), b.data().end());
    return DenseMatrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

DenseVector matvec(const DenseMatrix& a, std::span<const double> x) {
    require_length(x.size(), a.cols(), "matvec");
    DenseVector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
    return out;
}

DenseVector matvec_t(const DenseMatrix& a, std::span<const double> x) {
    require_length(x.size(), a.rows(), "matvec_t");
    DenseVector out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        auto arow = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += xi * arow[j];
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_length(b.size(), a.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

DenseVector axpy(double alpha, std::span<const double> x, std::span<const double> y) {
    require_length(y.size(), x.size(), "axpy");
    DenseVector out(y.begin(), y.end());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
    return out;
}

DenseVector subtract(std::span<const double> a, std::span<const double> b) {
    require_length(b.size(), a.size(), "subtract");
    DenseVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

namespace {

double off_diagonal_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

void sort_descending(DenseVector& values, DenseMatrix& vectors) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    DenseVector sorted_values(n);
    DenseMatrix sorted_vectors(vectors.rows(), n);
    for (std::size_t k = 0; k < n; ++k) {
        sorted_values[k] = values[order[k]];
        for (std::size_t r = 0; r < vectors.rows(); ++r) sorted_vectors(r, k) = vectors(r, order[k]);
    }
    values = std::move(sorted_values);
    vectors = std::move(sorted_vectors);
}

constexpr int kMaxJacobiSweeps = 100;
constexpr double kJacobiTolerance = 1e-12;
constexpr double kSymmetryTolerance = 1e-10;
constexpr double kPsdTolerance = 1e-10;
// Gram eigenvalues below this fraction of the largest carry no reliable
// eigenvector after back-mapping through Fᵀu/√λ.
constexpr double kGramCutoff = 1e-12;

}  // namespace

EigenDecomposition sym_eig(const DenseMatrix& g) {
    if (g.rows() != g.cols()) throw ShapeError("sym_eig: matrix is not square");
    if (!g.all_finite()) throw InvalidArgument("sym_eig: non-finite entries");
    const std::size_t n = g.rows();

    const double scale = g.frobenius_norm();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(g(i, j) - g(j, i)) > kSymmetryTolerance * std::max(scale, 1e-300)) {
                throw SymmetryError("sym_eig: entry (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") violates symmetry");
            }
        }
    }

    DenseMatrix a = g;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (g(i, j) + g(j, i));
    DenseMatrix v = DenseMatrix::identity(n);

    const double threshold = kJacobiTolerance * scale;
    for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
        if (off_diagonal_norm(a) <= threshold) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenDecomposition eig;
    eig.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) eig.values[i] = a(i, i);
    eig.vectors = std::move(v);
    sort_descending(eig.values, eig.vectors);
    return eig;
}

EigenDecomposition gram_eig(const DenseMatrix& f) {
    const std::size_t m = f.rows();
    const std::size_t n = f.cols();
    if (m > n) {
        throw ContractError("gram_eig: factor has more rows (" + std::to_string(m) + ") than columns (" +
                            std::to_string(n) + "); use sym_eig on the dense product");
    }
    if (!f.all_finite()) throw InvalidArgument("gram_eig: non-finite entries");

    EigenDecomposition small = sym_eig(gram_rows(f));
    clamp_psd(small);

    const double lambda_max = m == 0 ? 0.0 : small.values.front();
    std::size_t kept = 0;
    while (kept < m && small.values[kept] > 0.0 && small.values[kept] > kGramCutoff * lambda_max) ++kept;

    EigenDecomposition eig;
    eig.values.assign(n, 0.0);
    std::copy(small.values.begin(), small.values.end(), eig.values.begin());
    eig.vectors = DenseMatrix(n, kept);
    for (std::size_t k = 0; k < kept; ++k) {
        const DenseVector u = small.vector(k);
        DenseVector v = matvec_t(f, u);
        const double inv = 1.0 / std::sqrt(small.values[k]);
        for (std::size_t r = 0; r < n; ++r) eig.vectors(r, k) = v[r] * inv;
    }
    return eig;
}

void clamp_psd(EigenDecomposition& eig) {
    double largest = 0.0;
    for (double v : eig.values) largest = std::max(largest, std::abs(v));
    const double tolerance = kPsdTolerance * std::max(1.0, largest);
    for (double& v : eig.values) {
        if (v >= 0.0) continue;
        if (v < -tolerance) {
            throw NumericalError("eigenvalue " + std::to_string(v) + " of a PSD matrix is below -" +
                                 std::to_string(tolerance));
        }
        v = 0.0;
    }
}

}  // namespace pullback
