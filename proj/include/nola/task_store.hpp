#pragma once

// Binary task checkpoints (.nola).
//
// A checkpoint stores, per adapted layer, the seed and shape metadata needed
// to regenerate the random bases plus the trained coefficient vectors. All
// integers are little-endian and there is no padding:
//
//   "NOLA"            4 bytes magic
//   version           u16
//   model id          u32 byte length, then UTF-8 bytes
//   layer count       u32
//   per layer:
//     layer_id u32 | method u8 | encoding u8 | bits u8 | flags u8
//     m u32 | n u32 | r u32 | k u32 | l u32 | c f64 | base_seed u64
//     coefficient vectors, in order
//       NOLA: alpha (k), beta (l)    LoRA: A (m*r), B (r*n)    PRANC: theta (k)
//     each vector encoded as
//       Float64:   len * 8 bytes
//       Float32:   len * 4 bytes
//       Quantized: scale f64 | zero_point f64 | codes packed LSB-first,
//                  ceil(len * bits / 8) bytes, unused high bits zero
//     bias (n values) if flags bit 1 is set: f64 under Float64, else f32
//
// flags: bit 0 = basis shared across layers, bit 1 = bias present.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nola/accounting.hpp"
#include "nola/errors.hpp"
#include "nola/factors.hpp"
#include "nola/layers.hpp"
#include "nola/quant.hpp"

namespace nola {

inline constexpr std::array<char, 4> kCheckpointMagic{'N', 'O', 'L', 'A'};
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::size_t kLayerHeaderBytes = 44;

enum class CoeffEncoding : std::uint8_t { Float64 = 0, Float32 = 1, Quantized = 2 };

inline std::string encoding_name(CoeffEncoding e, int bits) {
    switch (e) {
        case CoeffEncoding::Float64: return "float64";
        case CoeffEncoding::Float32: return "float32";
        case CoeffEncoding::Quantized: return "quantized:" + std::to_string(bits);
    }
    return "?";
}

struct LayerRecord {
    std::uint32_t layer_id = 0;
    Method method = Method::Nola;
    std::uint32_t m = 1, n = 1, r = 1, k = 0, l = 0;
    double c = 1.0;
    std::uint64_t base_seed = 0;
    Sharing sharing = Sharing::Unique;
    CoeffEncoding encoding = CoeffEncoding::Float32;
    int bits = 0;                                  // Quantized only
    std::vector<std::vector<double>> vectors;      // Float64 / Float32
    std::vector<QuantizedVector> quantized;        // Quantized
    std::vector<double> bias;                      // empty, or n values

    /// Length of each coefficient vector implied by method and dims.
    std::vector<std::uint64_t> vector_lengths() const {
        switch (method) {
            case Method::Nola: return {k, l};
            case Method::Lora: return {std::uint64_t{m} * r, std::uint64_t{r} * n};
            case Method::Pranc: return {k};
            case Method::Dense: break;
        }
        throw std::domain_error("LayerRecord: dense layers have no checkpoint form");
    }

    std::uint64_t param_count() const {
        std::uint64_t total = 0;
        for (auto len : vector_lengths()) total += len;
        return total;
    }

    /// Coefficient values as used for reconstruction (dequantized if needed).
    std::vector<std::vector<double>> values() const {
        if (encoding != CoeffEncoding::Quantized) return vectors;
        std::vector<std::vector<double>> out;
        for (const auto& q : quantized) out.push_back(dequantize(q));
        return out;
    }

    friend bool operator==(const LayerRecord&, const LayerRecord&) = default;
};

struct TaskCheckpoint {
    std::uint16_t format_version = kCheckpointVersion;
    std::string base_model_id;
    std::vector<LayerRecord> layers;

    friend bool operator==(const TaskCheckpoint&, const TaskCheckpoint&) = default;
};

namespace detail {

inline std::uint8_t method_code(Method m) {
    switch (m) {
        case Method::Nola: return 1;
        case Method::Lora: return 2;
        case Method::Pranc: return 3;
        case Method::Dense: break;
    }
    throw std::domain_error("serialize: dense layers have no checkpoint form");
}

inline std::optional<Method> method_from_code(std::uint8_t code) {
    switch (code) {
        case 1: return Method::Nola;
        case 2: return Method::Lora;
        case 3: return Method::Pranc;
        default: return std::nullopt;
    }
}

inline std::uint64_t packed_code_bytes(std::uint64_t len, int bits) { return (len * bits + 7) / 8; }

inline std::uint64_t encoded_vector_bytes(std::uint64_t len, CoeffEncoding e, int bits) {
    switch (e) {
        case CoeffEncoding::Float64: return len * 8;
        case CoeffEncoding::Float32: return len * 4;
        case CoeffEncoding::Quantized: return 16 + packed_code_bytes(len, bits);
    }
    return 0;
}

inline bool bias_is_f64(CoeffEncoding e) { return e == CoeffEncoding::Float64; }

inline constexpr std::uint8_t kFlagShared = 1;
inline constexpr std::uint8_t kFlagBias = 2;

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_integral_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bytes_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
    }
    void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void put_bytes(const void* data, std::size_t len) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + len);
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    void set_layer(std::optional<std::uint32_t> id) { layer_ = id; }

    [[noreturn]] void fail(const std::string& what) const { throw format_error(what, pos_, layer_); }

    void need(std::uint64_t len, const char* what) const {
        if (len > remaining()) fail(std::string("truncated ") + what);
    }

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }
    float get_f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }
    std::span<const std::uint8_t> get_bytes(std::uint64_t len, const char* what) {
        need(len, what);
        auto out = bytes_.subspan(pos_, len);
        pos_ += len;
        return out;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::optional<std::uint32_t> layer_;
};

inline void check_record(const LayerRecord& rec) {
    if (rec.m == 0 || rec.n == 0) throw std::domain_error("LayerRecord: m and n must be positive");
    switch (rec.method) {
        case Method::Nola:
            if (rec.k == 0 || rec.l == 0 || rec.r == 0 || rec.r > std::min(rec.m, rec.n))
                throw std::domain_error("LayerRecord: invalid NOLA counts");
            break;
        case Method::Lora:
            if (rec.r == 0 || rec.k != 0 || rec.l != 0) throw std::domain_error("LayerRecord: invalid LoRA dims");
            break;
        case Method::Pranc:
            if (rec.k == 0 || rec.l != 0) throw std::domain_error("LayerRecord: invalid PRANC count");
            break;
        case Method::Dense: throw std::domain_error("LayerRecord: dense layers have no checkpoint form");
    }
    if (!std::isfinite(rec.c)) throw std::domain_error("LayerRecord: non-finite scale constant");
    const auto lens = rec.vector_lengths();
    if (rec.encoding == CoeffEncoding::Quantized) {
        QuantSpec{rec.bits}.validate();
        if (rec.quantized.size() != lens.size()) throw std::domain_error("LayerRecord: quantized vector count");
        for (std::size_t i = 0; i < lens.size(); ++i) {
            const auto& q = rec.quantized[i];
            if (q.codes.size() != lens[i] || q.bits != rec.bits)
                throw std::domain_error("LayerRecord: quantized vector shape");
            for (auto code : q.codes)
                if (code >= (1u << rec.bits)) throw std::domain_error("LayerRecord: code out of range");
        }
    } else {
        if (rec.vectors.size() != lens.size()) throw std::domain_error("LayerRecord: vector count");
        for (std::size_t i = 0; i < lens.size(); ++i) {
            if (rec.vectors[i].size() != lens[i]) throw std::domain_error("LayerRecord: vector length");
            for (double v : rec.vectors[i])
                if (!std::isfinite(v)) throw std::domain_error("LayerRecord: non-finite coefficient");
        }
    }
    if (!rec.bias.empty() && rec.bias.size() != rec.n) throw std::domain_error("LayerRecord: bias length");
    for (double v : rec.bias)
        if (!std::isfinite(v)) throw std::domain_error("LayerRecord: non-finite bias");
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const TaskCheckpoint& ckpt) {
    detail::ByteWriter w;
    w.put_bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
    w.put(ckpt.format_version);
    w.put(static_cast<std::uint32_t>(ckpt.base_model_id.size()));
    w.put_bytes(ckpt.base_model_id.data(), ckpt.base_model_id.size());
    w.put(static_cast<std::uint32_t>(ckpt.layers.size()));
    for (const auto& rec : ckpt.layers) {
        detail::check_record(rec);
        w.put(rec.layer_id);
        w.put(detail::method_code(rec.method));
        w.put(static_cast<std::uint8_t>(rec.encoding));
        w.put(static_cast<std::uint8_t>(rec.encoding == CoeffEncoding::Quantized ? rec.bits : 0));
        w.put(static_cast<std::uint8_t>((rec.sharing == Sharing::SharedAcrossLayers ? detail::kFlagShared : 0) |
                                        (rec.bias.empty() ? 0 : detail::kFlagBias)));
        for (auto v : {rec.m, rec.n, rec.r, rec.k, rec.l}) w.put(v);
        w.put_f64(rec.c);
        w.put(rec.base_seed);
        if (rec.encoding == CoeffEncoding::Quantized) {
            for (const auto& q : rec.quantized) {
                w.put_f64(q.scale);
                w.put_f64(q.zero_point);
                std::vector<std::uint8_t> packed(detail::packed_code_bytes(q.codes.size(), rec.bits), 0);
                for (std::size_t i = 0; i < q.codes.size(); ++i) {
                    const std::size_t bit = i * rec.bits;
                    const std::uint32_t shifted = std::uint32_t{q.codes[i]} << (bit % 8);
                    packed[bit / 8] |= static_cast<std::uint8_t>(shifted);
                    if ((bit % 8) + rec.bits > 8) packed[bit / 8 + 1] |= static_cast<std::uint8_t>(shifted >> 8);
                }
                w.put_bytes(packed.data(), packed.size());
            }
        } else {
            for (const auto& vec : rec.vectors)
                for (double v : vec) {
                    if (rec.encoding == CoeffEncoding::Float64) w.put_f64(v);
                    else w.put_f32(static_cast<float>(v));
                }
        }
        for (double v : rec.bias) {
            if (detail::bias_is_f64(rec.encoding)) w.put_f64(v);
            else w.put_f32(static_cast<float>(v));
        }
    }
    return w.take();
}

inline TaskCheckpoint deserialize(std::span<const std::uint8_t> bytes) {
    detail::ByteReader rd(bytes);
    auto magic = rd.get_bytes(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic.begin()))
        throw format_error("bad magic", 0);
    TaskCheckpoint ckpt;
    ckpt.format_version = rd.get<std::uint16_t>("version");
    if (ckpt.format_version != kCheckpointVersion) throw version_error(ckpt.format_version);
    const auto id_len = rd.get<std::uint32_t>("model id length");
    auto id = rd.get_bytes(id_len, "model id");
    ckpt.base_model_id.assign(id.begin(), id.end());
    const auto layer_count = rd.get<std::uint32_t>("layer count");

    // No storage is reserved from the declared count; a short blob fails at
    // the first missing field.
    for (std::uint32_t index = 0; index < layer_count; ++index) {
        LayerRecord rec;
        rec.layer_id = rd.get<std::uint32_t>(("id of layer #" + std::to_string(index)).c_str());
        rd.set_layer(rec.layer_id);
        const auto method = detail::method_from_code(rd.get<std::uint8_t>("method"));
        if (!method) rd.fail("unknown method code");
        rec.method = *method;
        const auto enc = rd.get<std::uint8_t>("encoding");
        if (enc > 2) rd.fail("unknown coefficient encoding");
        rec.encoding = static_cast<CoeffEncoding>(enc);
        rec.bits = rd.get<std::uint8_t>("bits");
        if (rec.encoding == CoeffEncoding::Quantized ? (rec.bits < 2 || rec.bits > 8) : rec.bits != 0)
            rd.fail("invalid quantization bits " + std::to_string(rec.bits));
        const auto flags = rd.get<std::uint8_t>("flags");
        if (flags & ~(detail::kFlagShared | detail::kFlagBias)) rd.fail("unknown layer flags");
        rec.sharing = (flags & detail::kFlagShared) ? Sharing::SharedAcrossLayers : Sharing::Unique;
        rec.m = rd.get<std::uint32_t>("m");
        rec.n = rd.get<std::uint32_t>("n");
        rec.r = rd.get<std::uint32_t>("r");
        rec.k = rd.get<std::uint32_t>("k");
        rec.l = rd.get<std::uint32_t>("l");
        rec.c = rd.get_f64("c");
        rec.base_seed = rd.get<std::uint64_t>("seed");

        std::vector<std::uint64_t> lens;
        try {
            lens = rec.vector_lengths();
        } catch (const std::domain_error& e) {
            rd.fail(e.what());
        }
        std::uint64_t payload = 0;
        for (auto len : lens) payload += detail::encoded_vector_bytes(len, rec.encoding, rec.bits);
        if (flags & detail::kFlagBias) payload += std::uint64_t{rec.n} * (detail::bias_is_f64(rec.encoding) ? 8 : 4);
        rd.need(payload, "payload");

        for (auto len : lens) {
            if (rec.encoding == CoeffEncoding::Quantized) {
                QuantizedVector q;
                q.bits = rec.bits;
                q.scale = rd.get_f64("quantization scale");
                q.zero_point = rd.get_f64("quantization zero point");
                auto packed = rd.get_bytes(detail::packed_code_bytes(len, rec.bits), "codes");
                q.codes.resize(len);
                const std::uint32_t mask = (1u << rec.bits) - 1;
                for (std::uint64_t i = 0; i < len; ++i) {
                    const std::uint64_t bit = i * rec.bits;
                    std::uint32_t word = packed[bit / 8];
                    if (bit / 8 + 1 < packed.size()) word |= std::uint32_t{packed[bit / 8 + 1]} << 8;
                    q.codes[i] = static_cast<std::uint8_t>((word >> (bit % 8)) & mask);
                }
                const std::uint64_t used_bits = len * rec.bits;
                if (used_bits % 8 != 0 && (packed.back() >> (used_bits % 8)) != 0)
                    rd.fail("nonzero padding bits in codes");
                rec.quantized.push_back(std::move(q));
            } else {
                std::vector<double> vec(len);
                for (auto& v : vec)
                    v = rec.encoding == CoeffEncoding::Float64 ? rd.get_f64("coefficient")
                                                               : static_cast<double>(rd.get_f32("coefficient"));
                rec.vectors.push_back(std::move(vec));
            }
        }
        if (flags & detail::kFlagBias) {
            rec.bias.resize(rec.n);
            for (auto& v : rec.bias)
                v = detail::bias_is_f64(rec.encoding) ? rd.get_f64("bias") : static_cast<double>(rd.get_f32("bias"));
        }
        try {
            detail::check_record(rec);
        } catch (const std::domain_error& e) {
            rd.fail(e.what());
        }
        rd.set_layer(std::nullopt);
        ckpt.layers.push_back(std::move(rec));
    }
    if (rd.remaining() != 0) rd.fail("trailing bytes after last layer");
    return ckpt;
}

/// Checkpoint form of an adapted layer. Quantized encodings quantize each
/// coefficient vector separately.
inline LayerRecord record_from_layer(std::uint32_t layer_id, const AdaptedLinear& layer,
                                     CoeffEncoding encoding = CoeffEncoding::Float32, int bits = 0) {
    LayerRecord rec;
    rec.layer_id = layer_id;
    rec.encoding = encoding;
    rec.m = static_cast<std::uint32_t>(layer.in_features());
    rec.n = static_cast<std::uint32_t>(layer.out_features());
    std::vector<std::vector<double>> vecs;
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NolaFactor>) {
                rec.method = Method::Nola;
                rec.r = static_cast<std::uint32_t>(f.r);
                rec.k = static_cast<std::uint32_t>(f.k);
                rec.l = static_cast<std::uint32_t>(f.l);
                rec.c = f.c;
                rec.base_seed = f.seed.base_seed;
                rec.sharing = f.seed.sharing;
                vecs = {f.alpha, f.beta};
            } else if constexpr (std::is_same_v<T, LoraFactor>) {
                rec.method = Method::Lora;
                rec.r = static_cast<std::uint32_t>(f.r);
                rec.c = f.c;
                vecs = {std::vector<double>(f.a.data().begin(), f.a.data().end()),
                        std::vector<double>(f.b.data().begin(), f.b.data().end())};
            } else if constexpr (std::is_same_v<T, PrancFactor>) {
                rec.method = Method::Pranc;
                rec.r = 0;
                rec.k = static_cast<std::uint32_t>(f.p);
                rec.base_seed = f.seed.base_seed;
                rec.sharing = f.seed.sharing;
                vecs = {f.theta};
            } else {
                throw std::domain_error("record_from_layer: layer has no delta");
            }
        },
        layer.delta);
    if (rec.method == Method::Pranc) rec.r = 1;  // unused, kept positive
    rec.bias = layer.bias;
    if (!detail::bias_is_f64(encoding))
        for (double& x : rec.bias) x = static_cast<double>(static_cast<float>(x));
    if (encoding == CoeffEncoding::Quantized) {
        rec.bits = bits;
        for (const auto& v : vecs) rec.quantized.push_back(quantize(v, QuantSpec{bits}));
    } else {
        if (encoding == CoeffEncoding::Float32)
            for (auto& v : vecs)
                for (double& x : v) x = static_cast<double>(static_cast<float>(x));
        rec.vectors = std::move(vecs);
    }
    detail::check_record(rec);
    return rec;
}

/// Rebuilds the layer's delta factor. Under unique sharing the record's
/// layer_id selects the seed namespace.
inline Delta delta_from_record(const LayerRecord& rec) {
    detail::check_record(rec);
    auto vals = rec.values();
    SeedSpec seed;
    seed.base_seed = rec.base_seed;
    seed.layer_id = rec.layer_id;
    seed.sharing = rec.sharing;
    switch (rec.method) {
        case Method::Nola:
            return NolaFactor{seed, rec.m, rec.n, rec.r, rec.k, rec.l, std::move(vals[0]), std::move(vals[1]), rec.c};
        case Method::Lora:
            return LoraFactor{rec.m, rec.n, rec.r, Matrix(rec.m, rec.r, std::move(vals[0])),
                              Matrix(rec.r, rec.n, std::move(vals[1])), rec.c};
        case Method::Pranc:
            return PrancFactor{seed, rec.m, rec.n, rec.k, std::move(vals[0])};
        case Method::Dense: break;
    }
    throw std::domain_error("delta_from_record: unsupported method");
}

/// Merged weights W + delta for every layer of the checkpoint, in order.
inline std::vector<Matrix> reconstruct(const TaskCheckpoint& ckpt, std::span<const Matrix> base,
                                       const StreamOptions& opts = {}) {
    if (base.size() != ckpt.layers.size())
        throw std::domain_error("reconstruct: " + std::to_string(base.size()) + " base matrices for " +
                                std::to_string(ckpt.layers.size()) + " layers");
    std::vector<Matrix> out;
    out.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        const auto& rec = ckpt.layers[i];
        if (base[i].rows() != rec.m || base[i].cols() != rec.n)
            throw std::domain_error("reconstruct: base " + shape_string(base[i]) + " does not match layer " +
                                    std::to_string(rec.layer_id));
        AdaptedLinear layer{base[i], {}, delta_from_record(rec)};
        out.push_back(merge(layer, {opts, nullptr}));
    }
    return out;
}

/// Post-training quantization of every coefficient vector. bits = 16 is a
/// passthrough that leaves the checkpoint unchanged.
inline TaskCheckpoint ptq_checkpoint(const TaskCheckpoint& ckpt, int bits) {
    if (bits == 16) return ckpt;
    QuantSpec spec{bits};
    spec.validate();
    TaskCheckpoint out = ckpt;
    for (auto& rec : out.layers) {
        auto vals = rec.values();
        rec.vectors.clear();
        rec.quantized.clear();
        rec.encoding = CoeffEncoding::Quantized;
        rec.bits = bits;
        for (const auto& v : vals) rec.quantized.push_back(quantize(v, spec));
    }
    return out;
}

struct ManifestEntry {
    std::string task;
    std::uint64_t bytes = 0;
    std::uint64_t trainable_params = 0;
    double compression_ratio = 0.0;  // sum(m*n) / trainable
};

struct StoreManifest {
    std::vector<ManifestEntry> entries;
};

inline StoreManifest report(std::span<const std::pair<std::string, TaskCheckpoint>> store) {
    StoreManifest manifest;
    for (const auto& [name, ckpt] : store) {
        ManifestEntry e;
        e.task = name;
        e.bytes = serialize(ckpt).size();
        std::uint64_t dense = 0;
        for (const auto& rec : ckpt.layers) {
            e.trainable_params += rec.param_count();
            dense += std::uint64_t{rec.m} * rec.n;
        }
        e.compression_ratio = e.trainable_params ? static_cast<double>(dense) / e.trainable_params : 0.0;
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

/// Canonical text dump: a header line, then one line per layer.
inline std::string info_dump(const TaskCheckpoint& ckpt) {
    std::ostringstream os;
    os << "model " << ckpt.base_model_id << " version " << ckpt.format_version << " layers "
       << ckpt.layers.size() << '\n';
    for (const auto& rec : ckpt.layers) {
        os << "layer " << rec.layer_id << ' ' << method_name(rec.method) << ' ' << rec.m << 'x' << rec.n;
        if (rec.method == Method::Nola) os << " r=" << rec.r << " k=" << rec.k << " l=" << rec.l;
        else if (rec.method == Method::Lora) os << " r=" << rec.r;
        else os << " p=" << rec.k;
        os << " params " << rec.param_count() << ' ' << encoding_name(rec.encoding, rec.bits) << '\n';
    }
    return os.str();
}

/// Writes to a temporary sibling and renames it into place.
inline void write_checkpoint_file(const std::filesystem::path& path, const TaskCheckpoint& ckpt) {
    const auto bytes = serialize(ckpt);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open " + path.string(), 0);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline TaskCheckpoint read_checkpoint_file(const std::filesystem::path& path) {
    return deserialize(read_file_bytes(path));
}

}  // namespace nola
