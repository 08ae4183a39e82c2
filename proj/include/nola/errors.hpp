#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace nola {

// Shape, count and range violations are reported as std::domain_error.

/// Malformed checkpoint or data file. Carries the byte offset where decoding
/// stopped and, when known, the layer being decoded.
class format_error : public std::runtime_error {
public:
    format_error(const std::string& what, std::size_t offset,
                 std::optional<std::uint32_t> layer_id = std::nullopt)
        : std::runtime_error(compose(what, offset, layer_id)), offset_(offset), layer_id_(layer_id) {}

    std::size_t offset() const noexcept { return offset_; }
    std::optional<std::uint32_t> layer_id() const noexcept { return layer_id_; }

private:
    static std::string compose(const std::string& what, std::size_t offset,
                               std::optional<std::uint32_t> layer_id) {
        std::string msg = what + " (offset " + std::to_string(offset);
        if (layer_id) msg += ", layer_id " + std::to_string(*layer_id);
        return msg + ")";
    }

    std::size_t offset_;
    std::optional<std::uint32_t> layer_id_;
};

/// Well-formed checkpoint written by an unsupported format version.
class version_error : public std::runtime_error {
public:
    explicit version_error(std::uint16_t version)
        : std::runtime_error("unsupported checkpoint version " + std::to_string(version)),
          version_(version) {}

    std::uint16_t version() const noexcept { return version_; }

private:
    std::uint16_t version_;
};

}  // namespace nola
