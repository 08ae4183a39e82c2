#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "nola/layers.hpp"

namespace nola {

struct LayerDims {
    std::size_t m = 1;
    std::size_t n = 1;
};

/// Trainable parameters for `num_layers` identical layers. PRANC takes its
/// basis count as k + l so that all methods can be compared at one budget.
inline std::uint64_t param_count(Method method, LayerDims dims, std::size_t r, std::size_t k,
                                 std::size_t l, std::size_t num_layers = 1) {
    std::uint64_t per_layer = 0;
    switch (method) {
        case Method::Dense: per_layer = std::uint64_t{dims.m} * dims.n; break;
        case Method::Lora: per_layer = std::uint64_t{r} * (dims.m + dims.n); break;
        case Method::Nola: per_layer = std::uint64_t{k} + l; break;
        case Method::Pranc: per_layer = std::uint64_t{k} + l; break;
    }
    return per_layer * num_layers;
}

/// Dense delta size over trainable parameter count:
/// mn / (r(m+n)) for LoRA, mn / (k+l) for NOLA and PRANC.
inline double compression_ratio(Method method, LayerDims dims, std::size_t r, std::size_t k, std::size_t l) {
    const double dense = static_cast<double>(dims.m) * static_cast<double>(dims.n);
    const auto trainable = param_count(method, dims, r, k, l, 1);
    if (trainable == 0) throw std::domain_error("compression_ratio: zero trainable parameters");
    return dense / static_cast<double>(trainable);
}

/// Multiply-add counts for reconstructing one d x d delta from k bases.
struct CostReport {
    std::uint64_t pranc_flops = 0;
    std::uint64_t nola_flops = 0;
    double speedup = 0.0;
};

/// PRANC: k d^2 + d^2. NOLA: k d r + 2 d r.
inline CostReport cost_model(std::uint64_t d, std::uint64_t k, std::uint64_t r) {
    if (d == 0 || k == 0 || r == 0) throw std::domain_error("cost_model: arguments must be positive");
    CostReport rep;
    rep.pranc_flops = k * d * d + d * d;
    rep.nola_flops = k * d * r + 2 * d * r;
    rep.speedup = static_cast<double>(rep.pranc_flops) / static_cast<double>(rep.nola_flops);
    return rep;
}

inline std::uint64_t trainable_coefficients(const AdaptedLinear& layer) {
    return std::visit(
        [&](const auto& f) -> std::uint64_t {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, std::monostate>)
                return layer.base_trainable ? layer.weight.size() : 0;
            else
                return f.param_count();
        },
        layer.delta);
}

}  // namespace nola
