#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "nola/factors.hpp"
#include "nola/matrix.hpp"

namespace nola {

using Delta = std::variant<std::monostate, NolaFactor, LoraFactor, PrancFactor>;

enum class Method { Dense, Nola, Lora, Pranc };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Dense: return "dense";
        case Method::Nola: return "nola";
        case Method::Lora: return "lora";
        case Method::Pranc: return "pranc";
    }
    return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
    if (s == "dense") return Method::Dense;
    if (s == "nola") return Method::Nola;
    if (s == "lora") return Method::Lora;
    if (s == "pranc") return Method::Pranc;
    return std::nullopt;
}

/// Linear layer y = x (W + delta) + bias with a frozen base W (m x n).
/// When base_trainable is set and there is no delta it is a plain dense layer.
struct AdaptedLinear {
    Matrix weight;
    std::vector<double> bias;  // empty: no bias
    Delta delta;
    bool base_trainable = false;

    std::size_t in_features() const { return weight.rows(); }
    std::size_t out_features() const { return weight.cols(); }
    bool has_delta() const { return !std::holds_alternative<std::monostate>(delta); }
};

/// Options for computing deltas: streaming parameters and optional
/// pre-generated bases.
struct DeltaOptions {
    StreamOptions stream;
    const BasisCache* cache = nullptr;
};

/// The layer's delta as a dense m x n matrix; zero when there is none.
inline Matrix delta_matrix(const AdaptedLinear& layer, const DeltaOptions& opts = {}) {
    return std::visit(
        [&](const auto& f) -> Matrix {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NolaFactor>) return nola_delta(f, opts.stream, opts.cache);
            else if constexpr (std::is_same_v<T, LoraFactor>) return lora_delta(f);
            else if constexpr (std::is_same_v<T, PrancFactor>) return pranc_delta(f, opts.stream, opts.cache);
            else return Matrix(layer.in_features(), layer.out_features());
        },
        layer.delta);
}

inline void add_bias(Matrix& y, const std::vector<double>& bias) {
    if (bias.empty()) return;
    if (bias.size() != y.cols()) throw std::domain_error("bias length mismatch");
    for (std::size_t i = 0; i < y.rows(); ++i) add_scaled(y.row(i), bias, 1.0);
}

/// Intermediate values kept from a forward pass for the backward pass.
struct ForwardContext {
    Matrix input;
    Matrix mix_a;      // NOLA mixed A / LoRA A
    Matrix mix_b;      // NOLA mixed B / LoRA B
    Matrix input_a;    // input * A
    Matrix delta;      // PRANC dense delta
};

namespace detail {

inline void check_input(const AdaptedLinear& layer, const Matrix& x) {
    if (x.cols() != layer.in_features())
        throw std::domain_error("forward: input has " + std::to_string(x.cols()) + " features, layer expects " +
                                std::to_string(layer.in_features()));
}

}  // namespace detail

/// Factored forward: the delta is applied as x*A*B (NOLA, LoRA) or through
/// the generated dense delta (PRANC), never merged into W.
inline Matrix forward(const AdaptedLinear& layer, const Matrix& x, const DeltaOptions& opts = {},
                      ForwardContext* ctx = nullptr) {
    detail::check_input(layer, x);
    Matrix y = matmul(x, layer.weight);
    ForwardContext local;
    ForwardContext& c = ctx ? *ctx : local;
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NolaFactor> || std::is_same_v<T, LoraFactor>) {
                if constexpr (std::is_same_v<T, NolaFactor>) {
                    auto mix = nola_mixtures(f, opts.stream, opts.cache);
                    c.mix_a = std::move(mix.a);
                    c.mix_b = std::move(mix.b);
                } else {
                    f.validate();
                    c.mix_a = f.a;
                    c.mix_b = f.b;
                }
                c.input_a = matmul(x, c.mix_a);
                Matrix low_rank = matmul(c.input_a, c.mix_b);
                add_scaled(y.data(), low_rank.data(), f.scale());
            } else if constexpr (std::is_same_v<T, PrancFactor>) {
                c.delta = pranc_delta(f, opts.stream, opts.cache);
                y += matmul(x, c.delta);
            }
        },
        layer.delta);
    if (ctx) c.input = x;
    add_bias(y, layer.bias);
    return y;
}

/// W + delta as a single matrix.
inline Matrix merge(const AdaptedLinear& layer, const DeltaOptions& opts = {}) {
    if (!layer.has_delta()) throw std::domain_error("merge: layer has no delta");
    return layer.weight + delta_matrix(layer, opts);
}

/// Forward through an already merged weight.
inline Matrix forward_merged(const Matrix& merged, const std::vector<double>& bias, const Matrix& x) {
    Matrix y = matmul(x, merged);
    add_bias(y, bias);
    return y;
}

/// Gradients of one layer. Only the members matching the layer's trainable
/// parameters are filled.
struct LayerGradients {
    Matrix input;                     // dL/dx, when requested
    Matrix weight;                    // dense layers only
    std::vector<double> bias;
    std::vector<double> coeff_a;      // NOLA alpha, PRANC theta
    std::vector<double> coeff_b;      // NOLA beta
    Matrix lora_a;
    Matrix lora_b;
};

/// Backward pass given dL/dy (batch x n) and the context of the matching
/// forward. NOLA coefficient gradients use the projected forms
/// x^T (dy B^T) and (x A)^T dy, which never form the m x n upstream gradient.
inline LayerGradients backward(const AdaptedLinear& layer, const ForwardContext& ctx, const Matrix& grad_out,
                               bool need_input_grad, const DeltaOptions& opts = {}) {
    const Matrix& x = ctx.input;
    if (grad_out.rows() != x.rows() || grad_out.cols() != layer.out_features())
        throw std::domain_error("backward: output gradient shape mismatch");
    LayerGradients g;
    if (!layer.bias.empty()) {
        g.bias.assign(layer.out_features(), 0.0);
        for (std::size_t i = 0; i < grad_out.rows(); ++i) add_scaled(g.bias, grad_out.row(i), 1.0);
    }
    if (layer.base_trainable) g.weight = matmul_tn(x, grad_out);
    if (need_input_grad) g.input = matmul_nt(grad_out, layer.weight);

    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NolaFactor> || std::is_same_v<T, LoraFactor>) {
                const double s = f.scale();
                Matrix grad_out_bt = matmul_nt(grad_out, ctx.mix_b);  // batch x r
                Matrix grad_a = matmul_tn(x, grad_out_bt);             // m x r  == G B^T
                Matrix grad_b = matmul_tn(ctx.input_a, grad_out);      // r x n  == A^T G
                if (need_input_grad) add_scaled(g.input.data(), matmul_nt(grad_out_bt, ctx.mix_a).data(), s);
                if constexpr (std::is_same_v<T, NolaFactor>) {
                    auto coeffs = nola_gradients_from_projections(f, grad_a, grad_b, opts.stream, opts.cache);
                    g.coeff_a = std::move(coeffs.alpha);
                    g.coeff_b = std::move(coeffs.beta);
                } else {
                    g.lora_a = std::move(grad_a) * s;
                    g.lora_b = std::move(grad_b) * s;
                }
            } else if constexpr (std::is_same_v<T, PrancFactor>) {
                g.coeff_a = pranc_gradients(f, matmul_tn(x, grad_out), opts.stream, opts.cache);
                if (need_input_grad) g.input += matmul_nt(grad_out, ctx.delta);
            }
        },
        layer.delta);
    return g;
}

}  // namespace nola
