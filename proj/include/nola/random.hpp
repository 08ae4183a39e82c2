#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace nola {

/// One SplitMix64 output for a generator whose state is `x` before the step.
constexpr std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class MatrixRole : std::uint64_t {
    A = 1,       // NOLA left basis, m x r
    B = 2,       // NOLA right basis, r x n
    Pranc = 3,   // PRANC flattened basis vectors
    Init = 4,    // frozen base weights and coefficient initialization
    Data = 5,    // synthetic datasets and shuffling
};

enum class Sharing : std::uint8_t { Unique = 0, SharedAcrossLayers = 1 };

/// Seed namespace for one pseudo-random stream.
///
/// Labels are mixed in the order role, layer_id, basis_index, chunk_index.
/// Under SharedAcrossLayers the layer_id label is omitted, so layers with
/// identical basis shapes draw identical bases.
struct SeedSpec {
    std::uint64_t base_seed = 0;
    MatrixRole role = MatrixRole::A;
    std::uint64_t layer_id = 0;
    std::uint64_t basis_index = 0;
    std::uint64_t chunk_index = 0;
    Sharing sharing = Sharing::Unique;

    std::vector<std::uint64_t> labels() const {
        std::vector<std::uint64_t> out{static_cast<std::uint64_t>(role)};
        if (sharing == Sharing::Unique) out.push_back(layer_id);
        out.push_back(basis_index);
        out.push_back(chunk_index);
        return out;
    }

    SeedSpec with_role(MatrixRole r) const {
        SeedSpec s = *this;
        s.role = r;
        return s;
    }
    SeedSpec with_index(std::uint64_t index) const {
        SeedSpec s = *this;
        s.basis_index = index;
        return s;
    }

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// state <- mix(base); then state <- mix(state ^ label) for each label.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::span<const std::uint64_t> labels) noexcept {
    std::uint64_t state = splitmix64_mix(base_seed);
    for (std::uint64_t label : labels) state = splitmix64_mix(state ^ label);
    return state;
}

inline std::uint64_t derive_seed(const SeedSpec& spec) {
    const auto labels = spec.labels();
    return derive_seed(spec.base_seed, labels);
}

/// Maps 64 random bits to (0, 1] using the top 53 bits; 0 is remapped to 1.
constexpr double unit_interval_open_closed(std::uint64_t bits) noexcept {
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return u == 0.0 ? 1.0 : u;
}

/// Box-Muller pair (cos branch, sin branch) for uniforms u1, u2 in (0, 1].
inline std::pair<double, double> box_muller(double u1, double u2) noexcept {
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// SplitMix64 generator with a cached Box-Muller companion draw.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) noexcept : state_(seed) {}
    explicit RngStream(const SeedSpec& spec) : state_(derive_seed(spec)) {}

    std::uint64_t next_u64() noexcept {
        const std::uint64_t out = splitmix64_mix(state_);
        state_ += 0x9E3779B97F4A7C15ULL;
        return out;
    }

    double next_uniform() noexcept { return unit_interval_open_closed(next_u64()); }

    double standard_normal() noexcept {
        if (cached_normal_) {
            const double z = *cached_normal_;
            cached_normal_.reset();
            return z;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const auto [z0, z1] = box_muller(u1, u2);
        cached_normal_ = z1;
        return z0;
    }

    /// Uniform integer in [0, bound) by rejection; bound must be positive.
    std::uint64_t next_below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
        std::uint64_t x;
        do x = next_u64();
        while (x >= limit);
        return x % bound;
    }

    std::uint64_t state() const noexcept { return state_; }
    const std::optional<double>& cached_normal() const noexcept { return cached_normal_; }

private:
    std::uint64_t state_;
    std::optional<double> cached_normal_;
};

}  // namespace nola
