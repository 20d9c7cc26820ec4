#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lanedrop {

/// Raised when a tensor operation receives operands of incompatible shape.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN or infinity shows up in a tensor.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::span<const double> values);
    static Matrix column_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    void fill(double value) noexcept;
    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    /// Throws NumericError naming `what` if any entry is NaN or infinite.
    void check_finite(const std::string& what) const;

    Matrix transposed() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s) noexcept;

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// transpose(a) * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * transpose(b)
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Adds the 1 x cols row vector `bias` to every row of `m`.
void add_row_broadcast(Matrix& m, const Matrix& bias);
/// Sum over rows, producing a 1 x cols row vector.
Matrix column_sums(const Matrix& m);

double max_abs_diff(const Matrix& a, const Matrix& b);

} // namespace lanedrop
