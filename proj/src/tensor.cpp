#include "lanedrop/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lanedrop {

namespace {

std::string shape_str(const Matrix& m) {
    std::ostringstream out;
    out << m.rows() << "x" << m.cols();
    return out.str();
}

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeError("Matrix: ragged initializer list");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
    Matrix m(1, values.size());
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

Matrix Matrix::column_vector(std::span<const double> values) {
    Matrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

void Matrix::fill(double value) noexcept {
    std::fill(data_.begin(), data_.end(), value);
}

void Matrix::check_finite(const std::string& what) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            std::ostringstream msg;
            msg << what << ": non-finite entry at (" << i / std::max<std::size_t>(cols_, 1) << ", "
                << i % std::max<std::size_t>(cols_, 1) << ")";
            throw NumericError(msg.str());
        }
    }
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t(c, r) = (*this)(r, c);
        }
    }
    return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (!same_shape(other)) {
        shape_mismatch("operator+=", *this, other);
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (!same_shape(other)) {
        shape_mismatch("operator-=", *this, other);
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] -= other.data_[i];
    }
    return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
    for (auto& x : data_) {
        x *= s;
    }
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        shape_mismatch("matmul", a, b);
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* dst = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            const double* src = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) {
                dst[j] += aik * src[j];
            }
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        shape_mismatch("matmul_tn", a, b);
    }
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* src = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) {
                continue;
            }
            double* dst = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) {
                dst[j] += aki * src[j];
            }
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        shape_mismatch("matmul_nt", a, b);
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.row(j).data();
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += ar[k] * br[k];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

void add_row_broadcast(Matrix& m, const Matrix& bias) {
    if (bias.rows() != 1 || bias.cols() != m.cols()) {
        shape_mismatch("add_row_broadcast", m, bias);
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            row[c] += bias(0, c);
        }
    }
}

Matrix column_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(0, c) += m(r, c);
        }
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        shape_mismatch("max_abs_diff", a, b);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

} // namespace lanedrop
