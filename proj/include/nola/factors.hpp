#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nola/basis.hpp"
#include "nola/matrix.hpp"
#include "nola/random.hpp"

namespace nola {

/// Rank-r weight delta whose factors are mixtures of frozen random bases:
///
///   delta = (c / r) * (sum_i alpha_i A_i) * (sum_j beta_j B_j)
///
/// with A_i of shape m x r and B_j of shape r x n. Only alpha and beta are
/// trained, so the parameter count k + l is independent of m, n and r.
struct NolaFactor {
    SeedSpec seed;  // base seed, layer id and sharing; role and index are set per basis
    std::size_t m = 1, n = 1, r = 1;
    std::size_t k = 1, l = 1;
    std::vector<double> alpha;
    std::vector<double> beta;
    double c = 1.0;

    double scale() const { return c / static_cast<double>(r); }
    BasisSpec a_basis() const { return BasisSpec::with_default_std(m, r, k); }
    BasisSpec b_basis() const { return BasisSpec::with_default_std(r, n, l); }
    SeedSpec a_seed() const { return seed.with_role(MatrixRole::A); }
    SeedSpec b_seed() const { return seed.with_role(MatrixRole::B); }
    std::size_t param_count() const { return k + l; }

    void validate() const {
        if (m == 0 || n == 0 || r == 0 || k == 0 || l == 0)
            throw std::domain_error("NolaFactor: dimensions and counts must be positive");
        if (r > std::min(m, n))
            throw std::domain_error("NolaFactor: rank " + std::to_string(r) + " exceeds min(m, n)");
        if (alpha.size() != k || beta.size() != l)
            throw std::domain_error("NolaFactor: coefficient lengths (" + std::to_string(alpha.size()) +
                                    ", " + std::to_string(beta.size()) + ") != (k, l) = (" +
                                    std::to_string(k) + ", " + std::to_string(l) + ")");
    }

    /// alpha ~ N(0, 1/k), beta = 0, so the delta starts at exactly zero.
    static NolaFactor initialized(const SeedSpec& seed, std::size_t m, std::size_t n, std::size_t r,
                                  std::size_t k, std::size_t l, double c = 1.0) {
        NolaFactor f{seed, m, n, r, k, l, std::vector<double>(k), std::vector<double>(l, 0.0), c};
        RngStream stream(seed.with_role(MatrixRole::Init).with_index(1));
        const double std_alpha = 1.0 / std::sqrt(static_cast<double>(k));
        for (double& a : f.alpha) a = std_alpha * stream.standard_normal();
        f.validate();
        return f;
    }
};

/// Plain low-rank factors trained directly: delta = (c / r) * A * B.
struct LoraFactor {
    std::size_t m = 1, n = 1, r = 1;
    Matrix a;  // m x r
    Matrix b;  // r x n
    double c = 1.0;

    double scale() const { return c / static_cast<double>(r); }
    std::size_t param_count() const { return r * (m + n); }

    void validate() const {
        if (m == 0 || n == 0 || r == 0) throw std::domain_error("LoraFactor: dimensions must be positive");
        if (a.rows() != m || a.cols() != r || b.rows() != r || b.cols() != n)
            throw std::domain_error("LoraFactor: factor shapes " + shape_string(a) + ", " +
                                    shape_string(b) + " inconsistent with m, n, r");
    }

    /// A ~ N(0, 1/m) from the seed's Init stream, B = 0.
    static LoraFactor initialized(const SeedSpec& seed, std::size_t m, std::size_t n, std::size_t r,
                                  double c = 1.0) {
        LoraFactor f{m, n, r, Matrix(m, r), Matrix(r, n), c};
        RngStream stream(seed.with_role(MatrixRole::Init).with_index(2));
        const double std_a = 1.0 / std::sqrt(static_cast<double>(m));
        for (double& v : f.a.data()) v = std_a * stream.standard_normal();
        f.validate();
        return f;
    }
};

/// Full-size delta as a mixture of p seeded random vectors of length m*n,
/// reshaped row-major to m x n.
struct PrancFactor {
    SeedSpec seed;
    std::size_t m = 1, n = 1;
    std::size_t p = 1;
    std::vector<double> theta;

    BasisSpec basis() const { return {1, m * n, p, 1.0 / std::sqrt(static_cast<double>(m))}; }
    SeedSpec basis_seed() const { return seed.with_role(MatrixRole::Pranc); }
    std::size_t param_count() const { return p; }

    void validate() const {
        if (m == 0 || n == 0 || p == 0) throw std::domain_error("PrancFactor: dimensions must be positive");
        if (theta.size() != p)
            throw std::domain_error("PrancFactor: " + std::to_string(theta.size()) +
                                    " coefficients for p = " + std::to_string(p));
    }

    static PrancFactor initialized(const SeedSpec& seed, std::size_t m, std::size_t n, std::size_t p) {
        PrancFactor f{seed, m, n, p, std::vector<double>(p, 0.0)};
        f.validate();
        return f;
    }
};

/// Pre-generated bases, used instead of regeneration when supplied.
struct BasisCache {
    std::vector<Matrix> a;  // NOLA A_i, or PRANC v_i
    std::vector<Matrix> b;  // NOLA B_j
};

inline BasisCache materialize(const NolaFactor& f, const StreamOptions& opts = {}) {
    return {materialize_bases(f.a_basis(), f.a_seed(), opts),
            materialize_bases(f.b_basis(), f.b_seed(), opts)};
}

inline BasisCache materialize(const PrancFactor& f, const StreamOptions& opts = {}) {
    return {materialize_bases(f.basis(), f.basis_seed(), opts), {}};
}

namespace detail {

inline Matrix mixture(const BasisSpec& spec, const SeedSpec& seed, std::span<const double> coeffs,
                      const StreamOptions& opts, const std::vector<Matrix>* cached) {
    if (!cached) return accumulate_mixture(spec, seed, coeffs, opts);
    if (cached->size() != coeffs.size()) throw std::domain_error("basis cache size mismatch");
    Matrix acc(spec.rows, spec.cols);
    for (std::size_t i = 0; i < coeffs.size(); ++i) add_scaled(acc.data(), (*cached)[i].data(), coeffs[i]);
    return acc;
}

inline std::vector<double> projections(const BasisSpec& spec, const SeedSpec& seed,
                                       std::span<const double> target, const StreamOptions& opts,
                                       const std::vector<Matrix>* cached) {
    if (!cached) return project_onto_bases(spec, seed, target, opts);
    std::vector<double> out(cached->size());
    for (std::size_t i = 0; i < cached->size(); ++i) out[i] = dot((*cached)[i].data(), target);
    return out;
}

}  // namespace detail

/// The mixed factors A = sum alpha_i A_i (m x r) and B = sum beta_j B_j (r x n).
struct NolaMixtures {
    Matrix a;
    Matrix b;
};

inline NolaMixtures nola_mixtures(const NolaFactor& f, const StreamOptions& opts = {},
                                  const BasisCache* cache = nullptr) {
    f.validate();
    return {detail::mixture(f.a_basis(), f.a_seed(), f.alpha, opts, cache ? &cache->a : nullptr),
            detail::mixture(f.b_basis(), f.b_seed(), f.beta, opts, cache ? &cache->b : nullptr)};
}

inline Matrix nola_delta(const NolaFactor& f, const StreamOptions& opts = {},
                         const BasisCache* cache = nullptr) {
    auto mix = nola_mixtures(f, opts, cache);
    return matmul(mix.a, mix.b) * f.scale();
}

struct NolaGradients {
    std::vector<double> alpha;
    std::vector<double> beta;
};

/// Coefficient gradients given the projected upstream gradients
/// grad_a = G * B^T (m x r) and grad_b = A^T * G (r x n).
inline NolaGradients nola_gradients_from_projections(const NolaFactor& f, const Matrix& grad_a,
                                                     const Matrix& grad_b, const StreamOptions& opts = {},
                                                     const BasisCache* cache = nullptr) {
    if (grad_a.rows() != f.m || grad_a.cols() != f.r || grad_b.rows() != f.r || grad_b.cols() != f.n)
        throw std::domain_error("nola_gradients_from_projections: projection shapes mismatch");
    NolaGradients g{
        detail::projections(f.a_basis(), f.a_seed(), grad_a.data(), opts, cache ? &cache->a : nullptr),
        detail::projections(f.b_basis(), f.b_seed(), grad_b.data(), opts, cache ? &cache->b : nullptr)};
    const double s = f.scale();
    for (double& v : g.alpha) v *= s;
    for (double& v : g.beta) v *= s;
    return g;
}

/// Gradients of L = <G, delta> with respect to alpha and beta:
///   dL/dalpha_i = (c/r) <A_i, G B^T>,  dL/dbeta_j = (c/r) <B_j, A^T G>.
/// Bases are regenerated by streaming unless a cache is supplied.
inline NolaGradients coeff_gradients(const NolaFactor& f, const Matrix& upstream,
                                     const StreamOptions& opts = {}, const BasisCache* cache = nullptr) {
    if (upstream.rows() != f.m || upstream.cols() != f.n)
        throw std::domain_error("coeff_gradients: upstream gradient is " + shape_string(upstream) +
                                ", expected " + std::to_string(f.m) + "x" + std::to_string(f.n));
    auto mix = nola_mixtures(f, opts, cache);
    return nola_gradients_from_projections(f, matmul_nt(upstream, mix.b), matmul_tn(mix.a, upstream),
                                           opts, cache);
}

inline Matrix lora_delta(const LoraFactor& f) {
    f.validate();
    return matmul(f.a, f.b) * f.scale();
}

struct LoraGradients {
    Matrix a;
    Matrix b;
};

/// dL/dA = (c/r) G B^T, dL/dB = (c/r) A^T G.
inline LoraGradients lora_gradients(const LoraFactor& f, const Matrix& upstream) {
    f.validate();
    if (upstream.rows() != f.m || upstream.cols() != f.n)
        throw std::domain_error("lora_gradients: upstream gradient shape mismatch");
    return {matmul_nt(upstream, f.b) * f.scale(), matmul_tn(f.a, upstream) * f.scale()};
}

inline Matrix pranc_delta(const PrancFactor& f, const StreamOptions& opts = {},
                          const BasisCache* cache = nullptr) {
    f.validate();
    return detail::mixture(f.basis(), f.basis_seed(), f.theta, opts, cache ? &cache->a : nullptr)
        .reshaped(f.m, f.n);
}

/// grad_theta_i = <v_i, vec(G)>.
inline std::vector<double> pranc_gradients(const PrancFactor& f, const Matrix& upstream,
                                           const StreamOptions& opts = {}, const BasisCache* cache = nullptr) {
    f.validate();
    if (upstream.rows() != f.m || upstream.cols() != f.n)
        throw std::domain_error("pranc_gradients: upstream gradient shape mismatch");
    return detail::projections(f.basis(), f.basis_seed(), upstream.data(), opts,
                               cache ? &cache->a : nullptr);
}

}  // namespace nola
