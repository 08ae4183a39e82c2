#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nola/factors.hpp"

namespace nola {

/// Per-vector uniform affine quantization with 2^bits levels.
struct QuantSpec {
    int bits = 4;

    std::uint32_t levels() const { return std::uint32_t{1} << bits; }
    void validate() const {
        if (bits < 2 || bits > 8)
            throw std::domain_error("quantization bits must be in [2, 8], got " + std::to_string(bits));
    }
};

/// value_i = zero_point + codes_i * scale.
struct QuantizedVector {
    std::vector<std::uint8_t> codes;
    double scale = 1.0;
    double zero_point = 0.0;
    int bits = 8;

    friend bool operator==(const QuantizedVector&, const QuantizedVector&) = default;
};

/// zero_point = min(v), scale = (max - min) / (2^bits - 1) (1 when constant),
/// codes rounded half away from zero and clamped to the level range.
inline QuantizedVector quantize(std::span<const double> v, const QuantSpec& spec) {
    spec.validate();
    if (v.empty()) throw std::domain_error("quantize: empty vector");
    for (double x : v)
        if (!std::isfinite(x)) throw std::domain_error("quantize: non-finite entry");
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    QuantizedVector q;
    q.bits = spec.bits;
    q.zero_point = *lo;
    const double max_code = static_cast<double>(spec.levels() - 1);
    q.scale = *hi > *lo ? (*hi - *lo) / max_code : 1.0;
    q.codes.reserve(v.size());
    for (double x : v) {
        const double code = std::clamp(std::round((x - q.zero_point) / q.scale), 0.0, max_code);
        q.codes.push_back(static_cast<std::uint8_t>(code));
    }
    return q;
}

inline std::vector<double> dequantize(const QuantizedVector& q) {
    QuantSpec{q.bits}.validate();
    const std::uint32_t levels = std::uint32_t{1} << q.bits;
    std::vector<double> out;
    out.reserve(q.codes.size());
    for (std::uint8_t code : q.codes) {
        if (code >= levels)
            throw std::domain_error("dequantize: code " + std::to_string(code) + " out of range for " +
                                    std::to_string(q.bits) + " bits");
        out.push_back(q.zero_point + code * q.scale);
    }
    return out;
}

/// dequantize(quantize(v)): the values a quantized forward pass sees.
inline std::vector<double> fake_quantize(std::span<const double> v, const QuantSpec& spec) {
    return dequantize(quantize(v, spec));
}

/// Quantization-aware gradient step: the forward pass uses the quantized
/// coefficients and the quantizer is treated as identity in the backward
/// pass, so the result is coeff_gradients evaluated at the quantized values.
inline NolaGradients qat_step(const NolaFactor& f, const QuantSpec& spec, const Matrix& upstream,
                              const StreamOptions& opts = {}) {
    NolaFactor quantized = f;
    quantized.alpha = fake_quantize(f.alpha, spec);
    quantized.beta = fake_quantize(f.beta, spec);
    return coeff_gradients(quantized, upstream, opts);
}

}  // namespace nola
