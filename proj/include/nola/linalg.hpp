#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nola/matrix.hpp"

namespace nola {

/// Dimensions of a weight tensor, e.g. a conv filter out x in x kh x kw.
struct TensorShape {
    std::vector<std::size_t> dims;

    std::size_t total() const {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
    }
};

/// Divisor pair (m, n) of the element count with m <= n and n - m minimal.
inline std::pair<std::size_t, std::size_t> reshape_near_square(const TensorShape& shape) {
    const std::size_t total = shape.total();
    if (total == 0) throw std::domain_error("reshape_near_square: empty tensor");
    std::size_t m = 1;
    for (std::size_t d = 1; d * d <= total; ++d)
        if (total % d == 0) m = d;
    return {m, total / m};
}

/// Reshapes a tensor's flat data into its near-square matrix form.
inline Matrix to_near_square_matrix(const TensorShape& shape, std::vector<double> data) {
    if (data.size() != shape.total()) throw std::domain_error("to_near_square_matrix: size mismatch");
    auto [m, n] = reshape_near_square(shape);
    return Matrix(m, n, std::move(data));
}

namespace detail {

// Householder QR of a tall matrix (rows >= cols), returning the upper-triangular
// factor R (cols x cols). Singular values of R equal those of the input.
inline Matrix householder_r(Matrix a) {
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();
    std::vector<double> v(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        double norm2 = 0.0;
        for (std::size_t i = j; i < rows; ++i) norm2 += a(i, j) * a(i, j);
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) continue;
        const double alpha = a(j, j) > 0 ? -norm : norm;
        for (std::size_t i = j; i < rows; ++i) v[i] = a(i, j);
        v[j] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = j; i < rows; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        for (std::size_t c = j; c < cols; ++c) {
            double s = 0.0;
            for (std::size_t i = j; i < rows; ++i) s += v[i] * a(i, c);
            s = 2.0 * s / vnorm2;
            for (std::size_t i = j; i < rows; ++i) a(i, c) -= s * v[i];
        }
    }
    Matrix r(cols, cols);
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = i; j < cols; ++j) r(i, j) = a(i, j);
    return r;
}

}  // namespace detail

/// Singular values in descending order.
///
/// Tall inputs are first reduced to their triangular QR factor, then the
/// columns are orthogonalized with one-sided (Hestenes) Jacobi rotations; the
/// singular values are the final column norms.
inline std::vector<double> singular_values(const Matrix& x) {
    if (x.empty()) return {};
    Matrix work = x.rows() >= x.cols() ? detail::householder_r(x) : detail::householder_r(transpose(x));
    const std::size_t n = work.cols();
    // Column-major copy so each column is contiguous for the rotations.
    std::vector<std::vector<double>> col(n, std::vector<double>(work.rows()));
    for (std::size_t i = 0; i < work.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) col[j][i] = work(i, j);

    constexpr double eps = 1e-15;
    constexpr int max_sweeps = 80;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < col[p].size(); ++i) {
                    alpha += col[p][i] * col[p][i];
                    beta += col[q][i] * col[q][i];
                    gamma += col[p][i] * col[q][i];
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < col[p].size(); ++i) {
                    const double xp = col[p][i];
                    const double xq = col[q][i];
                    col[p][i] = c * xp - s * xq;
                    col[q][i] = s * xp + c * xq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(col[j], col[j]));
    std::sort(sigma.begin(), sigma.end(), std::greater<>{});
    return sigma;
}

inline constexpr double kDefaultRankTolerance = 1e-9;

/// Rank of the span of the given samples: each sample is flattened to a row,
/// the rows are stacked, and singular values above
/// tol_rel * sigma_max * max(rows, cols) are counted.
inline std::size_t numerical_rank(std::span<const Matrix> samples,
                                  double tol_rel = kDefaultRankTolerance) {
    if (samples.empty()) throw std::domain_error("numerical_rank: no samples");
    const std::size_t width = samples.front().size();
    Matrix stacked(samples.size(), width);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        require_same_shape(samples[s], samples.front(), "numerical_rank");
        std::copy(samples[s].data().begin(), samples[s].data().end(), stacked.row(s).begin());
    }
    const auto sigma = singular_values(stacked);
    if (sigma.empty() || sigma.front() == 0.0) return 0;
    const double cutoff =
        tol_rel * sigma.front() * static_cast<double>(std::max(stacked.rows(), stacked.cols()));
    return static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cutoff; }));
}

}  // namespace nola
