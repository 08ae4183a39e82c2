#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nola/matrix.hpp"
#include "nola/random.hpp"

namespace nola {

/// Shape and count of a family of seeded random basis matrices.
struct BasisSpec {
    std::size_t rows = 1;
    std::size_t cols = 1;
    std::size_t count = 1;
    double entry_std = 1.0;

    /// Entries scaled by 1/sqrt(rows).
    static BasisSpec with_default_std(std::size_t rows, std::size_t cols, std::size_t count) {
        return {rows, cols, count, 1.0 / std::sqrt(static_cast<double>(rows))};
    }
};

/// How basis matrices are streamed: at most `chunk_size` are alive at once,
/// generated by up to `workers` threads.
struct StreamOptions {
    std::size_t chunk_size = 16;
    std::size_t workers = 1;
};

namespace detail {

inline void fill_basis(Matrix& out, const SeedSpec& seed, double entry_std) {
    RngStream stream(seed);
    for (double& v : out.data()) v = entry_std * stream.standard_normal();
}

inline void check_stream_options(const StreamOptions& opts) {
    if (opts.chunk_size == 0) throw std::domain_error("chunk_size must be positive");
    if (opts.workers == 0) throw std::domain_error("workers must be positive");
}

}  // namespace detail

/// Basis matrix `index`, filled row-major from the stream for
/// `seed.with_index(index)`.
inline Matrix generate_basis_matrix(const BasisSpec& spec, const SeedSpec& seed, std::size_t index) {
    if (index >= spec.count)
        throw std::domain_error("generate_basis_matrix: index " + std::to_string(index) +
                                " out of range for count " + std::to_string(spec.count));
    Matrix out(spec.rows, spec.cols);
    detail::fill_basis(out, seed.with_index(index), spec.entry_std);
    return out;
}

/// Calls visit(i, basis_i) for every i in ascending order, materializing one
/// chunk of bases at a time. Generation inside a chunk is spread over worker
/// threads; visiting is always sequential.
template <typename Visitor>
void for_each_basis(const BasisSpec& spec, const SeedSpec& seed, const StreamOptions& opts,
                    Visitor&& visit) {
    detail::check_stream_options(opts);
    const std::size_t chunk = std::min(opts.chunk_size, std::max<std::size_t>(spec.count, 1));
    std::vector<Matrix> buffer(chunk, Matrix(spec.rows, spec.cols));
    for (std::size_t start = 0; start < spec.count; start += chunk) {
        const std::size_t len = std::min(chunk, spec.count - start);
        const std::size_t workers = std::min(opts.workers, len);
        auto generate = [&](std::size_t worker) {
            for (std::size_t j = worker; j < len; j += workers)
                detail::fill_basis(buffer[j], seed.with_index(start + j), spec.entry_std);
        };
        if (workers <= 1) {
            generate(0);
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(workers - 1);
            for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(generate, w);
            generate(0);
        }
        for (std::size_t j = 0; j < len; ++j) visit(start + j, std::as_const(buffer[j]));
    }
}

/// sum_i coeffs[i] * basis_i, accumulated in ascending i. The result is
/// bitwise independent of chunk size and worker count.
inline Matrix accumulate_mixture(const BasisSpec& spec, const SeedSpec& seed,
                                 std::span<const double> coeffs, const StreamOptions& opts = {}) {
    if (coeffs.size() != spec.count)
        throw std::domain_error("accumulate_mixture: " + std::to_string(coeffs.size()) +
                                " coefficients for " + std::to_string(spec.count) + " bases");
    Matrix acc(spec.rows, spec.cols);
    for_each_basis(spec, seed, opts, [&](std::size_t i, const Matrix& basis) {
        add_scaled(acc.data(), basis.data(), coeffs[i]);
    });
    return acc;
}

/// out[i] = <basis_i, target>_F for every basis in the family.
inline std::vector<double> project_onto_bases(const BasisSpec& spec, const SeedSpec& seed,
                                              std::span<const double> target,
                                              const StreamOptions& opts = {}) {
    if (target.size() != spec.rows * spec.cols)
        throw std::domain_error("project_onto_bases: target size mismatch");
    std::vector<double> out(spec.count);
    for_each_basis(spec, seed, opts,
                   [&](std::size_t i, const Matrix& basis) { out[i] = dot(basis.data(), target); });
    return out;
}

/// Every basis of the family held in memory, for callers that trade memory
/// for regeneration time.
inline std::vector<Matrix> materialize_bases(const BasisSpec& spec, const SeedSpec& seed,
                                             const StreamOptions& opts = {}) {
    std::vector<Matrix> out;
    out.reserve(spec.count);
    for_each_basis(spec, seed, opts, [&](std::size_t, const Matrix& b) { out.push_back(b); });
    return out;
}

}  // namespace nola
