#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nola {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw std::domain_error("Matrix: data length " + std::to_string(data_.size()) +
                                    " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : rows) {
            if (row.size() != cols_) throw std::domain_error("Matrix: ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix out(n, n);
        for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
        return out;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    /// Same data, new shape. Row-major order is preserved.
    Matrix reshaped(std::size_t rows, std::size_t cols) const& {
        return Matrix(rows, cols, data_);
    }
    Matrix reshaped(std::size_t rows, std::size_t cols) && {
        return Matrix(rows, cols, std::move(data_));
    }

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s) noexcept {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const Matrix& x, const Matrix& y, const char* op) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw std::domain_error(std::string(op) + ": shape mismatch " + shape_string(x) + " vs " +
                                shape_string(y));
}

inline Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

inline Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

inline Matrix operator+(Matrix x, const Matrix& y) { return x += y; }
inline Matrix operator-(Matrix x, const Matrix& y) { return x -= y; }
inline Matrix operator*(Matrix x, double s) { return x *= s; }
inline Matrix operator*(double s, Matrix x) { return x *= s; }

/// out += scale * x, elementwise.
inline void add_scaled(std::span<double> out, std::span<const double> x, double scale) {
    if (out.size() != x.size()) throw std::domain_error("add_scaled: length mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * x[i];
}

/// X * Y. Each output element accumulates over the inner index in ascending
/// order, so results do not depend on blocking or threading.
inline Matrix matmul(const Matrix& x, const Matrix& y) {
    if (x.cols() != y.rows())
        throw std::domain_error("matmul: inner dimension mismatch " + shape_string(x) + " * " +
                                shape_string(y));
    Matrix out(x.rows(), y.cols());
    const std::size_t inner = x.cols();
    const std::size_t ncols = y.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double* out_row = out.row(i).data();
        const double* x_row = x.row(i).data();
        for (std::size_t p = 0; p < inner; ++p) {
            const double a = x_row[p];
            const double* y_row = y.row(p).data();
            for (std::size_t j = 0; j < ncols; ++j) out_row[j] += a * y_row[j];
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& x) {
    Matrix out(x.cols(), x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
    return out;
}

/// X^T * Y without materializing the transpose.
inline Matrix matmul_tn(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows())
        throw std::domain_error("matmul_tn: row mismatch " + shape_string(x) + " vs " +
                                shape_string(y));
    Matrix out(x.cols(), y.cols());
    for (std::size_t p = 0; p < x.rows(); ++p) {
        const double* x_row = x.row(p).data();
        const double* y_row = y.row(p).data();
        for (std::size_t i = 0; i < x.cols(); ++i) {
            const double a = x_row[i];
            double* out_row = out.row(i).data();
            for (std::size_t j = 0; j < y.cols(); ++j) out_row[j] += a * y_row[j];
        }
    }
    return out;
}

/// X * Y^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& x, const Matrix& y) {
    if (x.cols() != y.cols())
        throw std::domain_error("matmul_nt: column mismatch " + shape_string(x) + " vs " +
                                shape_string(y));
    Matrix out(x.rows(), y.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* x_row = x.row(i).data();
        for (std::size_t j = 0; j < y.rows(); ++j) {
            const double* y_row = y.row(j).data();
            double acc = 0.0;
            for (std::size_t p = 0; p < x.cols(); ++p) acc += x_row[p] * y_row[p];
            out(i, j) = acc;
        }
    }
    return out;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::domain_error("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

/// Sum of elementwise products.
inline double frobenius_inner(const Matrix& x, const Matrix& y) {
    require_same_shape(x, y, "frobenius_inner");
    return dot(x.data(), y.data());
}

inline double frobenius_norm(const Matrix& x) { return std::sqrt(frobenius_inner(x, x)); }

inline double max_abs_diff(const Matrix& x, const Matrix& y) {
    require_same_shape(x, y, "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        worst = std::max(worst, std::abs(x.data()[i] - y.data()[i]));
    return worst;
}

}  // namespace nola
