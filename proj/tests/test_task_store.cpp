#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nola/task_store.hpp"

using namespace nola;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen) {
    std::normal_distribution<double> dist;
    std::vector<double> v(n);
    for (double& x : v) x = dist(gen);
    return v;
}

LayerRecord nola_record(std::uint32_t id, std::uint32_t m, std::uint32_t n, std::uint32_t k, std::mt19937_64& gen,
                        CoeffEncoding enc = CoeffEncoding::Float64) {
    LayerRecord rec;
    rec.layer_id = id;
    rec.method = Method::Nola;
    rec.m = m;
    rec.n = n;
    rec.r = 2;
    rec.k = k;
    rec.l = k;
    rec.base_seed = 1234 + id;
    rec.encoding = enc;
    rec.vectors = {random_vector(k, gen), random_vector(k, gen)};
    if (enc == CoeffEncoding::Float32)
        for (auto& v : rec.vectors)
            for (double& x : v) x = static_cast<float>(x);
    return rec;
}

TaskCheckpoint mixed_checkpoint(std::mt19937_64& gen) {
    TaskCheckpoint ckpt;
    ckpt.base_model_id = "toy-base";
    ckpt.layers.push_back(nola_record(0, 8, 6, 5, gen));
    ckpt.layers.back().bias = random_vector(6, gen);

    LayerRecord lora;
    lora.layer_id = 1;
    lora.method = Method::Lora;
    lora.m = 6;
    lora.n = 4;
    lora.r = 2;
    lora.encoding = CoeffEncoding::Float64;
    lora.vectors = {random_vector(12, gen), random_vector(8, gen)};
    ckpt.layers.push_back(lora);

    LayerRecord pranc;
    pranc.layer_id = 2;
    pranc.method = Method::Pranc;
    pranc.m = 4;
    pranc.n = 3;
    pranc.r = 1;
    pranc.k = 7;
    pranc.base_seed = 99;
    pranc.sharing = Sharing::SharedAcrossLayers;
    pranc.encoding = CoeffEncoding::Quantized;
    pranc.bits = 3;
    pranc.quantized = {quantize(random_vector(7, gen), QuantSpec{3})};
    pranc.bias = {0.5, -0.25, 1.0};
    ckpt.layers.push_back(pranc);
    return ckpt;
}

std::vector<Matrix> random_bases(const TaskCheckpoint& ckpt, std::mt19937_64& gen) {
    std::vector<Matrix> base;
    for (const auto& rec : ckpt.layers) base.emplace_back(rec.m, rec.n, random_vector(std::size_t{rec.m} * rec.n, gen));
    return base;
}

}  // namespace

TEST(Serialize, RoundtripIsByteFixedPoint) {
    std::mt19937_64 gen(1);
    auto ckpt = mixed_checkpoint(gen);
    auto bytes = serialize(ckpt);
    auto back = deserialize(bytes);
    EXPECT_EQ(back, ckpt);
    EXPECT_EQ(serialize(back), bytes);
}

TEST(Serialize, EmptyLayerListIsHeaderOnly) {
    TaskCheckpoint ckpt;
    ckpt.base_model_id = "base";
    auto bytes = serialize(ckpt);
    EXPECT_EQ(bytes.size(), 4u + 2 + 4 + 4 + 4);
    EXPECT_EQ(bytes[0], 'N');
    EXPECT_EQ(bytes[3], 'A');
    EXPECT_EQ(bytes[4], 1);  // version, little-endian
    EXPECT_EQ(bytes[5], 0);
    EXPECT_EQ(deserialize(bytes), ckpt);
}

TEST(Serialize, LayerHeaderLayout) {
    std::mt19937_64 gen(2);
    TaskCheckpoint ckpt;
    ckpt.layers.push_back(nola_record(0x01020304, 8, 6, 5, gen));
    auto bytes = serialize(ckpt);
    const std::size_t h = 4 + 2 + 4 + 0 + 4;
    EXPECT_EQ(bytes[h], 0x04);
    EXPECT_EQ(bytes[h + 3], 0x01);
    EXPECT_EQ(bytes[h + 4], 1);  // NOLA
    EXPECT_EQ(bytes[h + 5], 0);  // Float64
    EXPECT_EQ(bytes.size(), h + kLayerHeaderBytes + 10 * 8);
}

TEST(Serialize, Gpt2MediumSizeArithmetic) {
    // 24 blocks with two adapted 1024x1024 matrices each, k = l = 1000.
    std::mt19937_64 gen(3);
    TaskCheckpoint ckpt;
    ckpt.base_model_id = "gpt2-medium";
    for (std::uint32_t i = 0; i < 48; ++i) ckpt.layers.push_back(nola_record(i, 1024, 1024, 1000, gen, CoeffEncoding::Float32));
    std::uint64_t params = 0;
    for (const auto& rec : ckpt.layers) params += rec.param_count();
    EXPECT_EQ(params, 96'000u);
    EXPECT_EQ(serialize(ckpt).size(), 4u + 2 + 4 + 11 + 4 + 48 * kLayerHeaderBytes + 96'000 * 4);
}

TEST(Serialize, QuantizedCodesPackedLsbFirst) {
    LayerRecord rec;
    rec.method = Method::Pranc;
    rec.m = 1;
    rec.n = 3;
    rec.k = 3;
    rec.encoding = CoeffEncoding::Quantized;
    rec.bits = 3;
    rec.quantized = {QuantizedVector{{5, 2, 7}, 0.5, -1.0, 3}};
    TaskCheckpoint ckpt{kCheckpointVersion, "", {rec}};
    auto bytes = serialize(ckpt);
    // codes 101, 010, 111 -> bits 0..8: 1 0 1 0 1 0 1 1 1
    ASSERT_EQ(bytes.size(), 14u + kLayerHeaderBytes + 16 + 2);
    EXPECT_EQ(bytes[bytes.size() - 2], 0b11010101);
    EXPECT_EQ(bytes[bytes.size() - 1], 0b00000001);
    EXPECT_EQ(deserialize(bytes), ckpt);

    bytes.back() |= 0x80;
    EXPECT_THROW(deserialize(bytes), format_error);
}

TEST(Serialize, QuantizedRoundtripPreservesCodesForAllBits) {
    std::mt19937_64 gen(4);
    for (int bits = 2; bits <= 8; ++bits) {
        TaskCheckpoint ckpt;
        auto rec = nola_record(0, 9, 9, 13, gen);
        ckpt.layers.push_back(rec);
        auto q = ptq_checkpoint(ckpt, bits);
        auto back = deserialize(serialize(q));
        ASSERT_EQ(back, q) << bits;
        EXPECT_EQ(back.layers[0].quantized[0].codes, quantize(rec.vectors[0], QuantSpec{bits}).codes);
    }
}

TEST(Serialize, InvalidRecordsThrowDomainError) {
    std::mt19937_64 gen(5);
    TaskCheckpoint ckpt;
    ckpt.layers.push_back(nola_record(0, 4, 4, 3, gen));
    ckpt.layers[0].vectors[1].pop_back();
    EXPECT_THROW(serialize(ckpt), std::domain_error);
    ckpt.layers[0] = nola_record(0, 4, 4, 3, gen);
    ckpt.layers[0].r = 5;  // exceeds min(m, n)
    EXPECT_THROW(serialize(ckpt), std::domain_error);
}

TEST(Deserialize, BadMagicIsFormatError) {
    std::mt19937_64 gen(6);
    auto bytes = serialize(mixed_checkpoint(gen));
    bytes[1] = 'X';
    try {
        deserialize(bytes);
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        EXPECT_EQ(e.offset(), 0u);
        EXPECT_FALSE(e.layer_id().has_value());
    }
}

TEST(Deserialize, UnknownVersionIsVersionError) {
    auto bytes = serialize(TaskCheckpoint{});
    bytes[4] = 2;
    EXPECT_THROW(deserialize(bytes), version_error);
}

TEST(Deserialize, TruncationMidPayloadNamesLayer) {
    std::mt19937_64 gen(7);
    TaskCheckpoint ckpt;
    ckpt.layers.push_back(nola_record(41, 8, 8, 4, gen));
    ckpt.layers.push_back(nola_record(42, 8, 8, 4, gen));
    auto bytes = serialize(ckpt);
    bytes.resize(bytes.size() - 5);
    try {
        deserialize(bytes);
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        ASSERT_TRUE(e.layer_id().has_value());
        EXPECT_EQ(*e.layer_id(), 42u);
    }
}

TEST(Deserialize, EveryTruncationIsRejected) {
    std::mt19937_64 gen(8);
    auto bytes = serialize(mixed_checkpoint(gen));
    for (std::size_t len = 0; len < bytes.size(); ++len)
        EXPECT_THROW(deserialize(std::span(bytes.data(), len)), format_error) << len;
}

TEST(Deserialize, TrailingBytesRejected) {
    auto bytes = serialize(TaskCheckpoint{});
    bytes.push_back(0);
    EXPECT_THROW(deserialize(bytes), format_error);
}

TEST(Deserialize, HugeLayerCountRejectedWithoutAllocation) {
    auto bytes = serialize(TaskCheckpoint{});
    bytes[bytes.size() - 1] = 0xFF;
    EXPECT_THROW(deserialize(bytes), format_error);
}

TEST(Reconstruct, ZeroCoefficientsReturnBaseExactly) {
    std::mt19937_64 gen(9);
    auto ckpt = mixed_checkpoint(gen);
    for (auto& rec : ckpt.layers) {
        for (auto& v : rec.vectors) std::fill(v.begin(), v.end(), 0.0);
        for (auto& q : rec.quantized) q = quantize(std::vector<double>(q.codes.size(), 0.0), QuantSpec{q.bits});
    }
    auto base = random_bases(ckpt, gen);
    EXPECT_EQ(reconstruct(ckpt, base), base);
}

TEST(Reconstruct, RoundtrippedCheckpointGivesBitwiseEqualWeights) {
    std::mt19937_64 gen(10);
    auto ckpt = mixed_checkpoint(gen);
    auto base = random_bases(ckpt, gen);
    EXPECT_EQ(reconstruct(deserialize(serialize(ckpt)), base), reconstruct(ckpt, base));
    EXPECT_EQ(reconstruct(ckpt, base, {1, 1}), reconstruct(ckpt, base, {3, 4}));
}

TEST(Reconstruct, ShapeMismatchThrows) {
    std::mt19937_64 gen(11);
    auto ckpt = mixed_checkpoint(gen);
    auto base = random_bases(ckpt, gen);
    base[1] = Matrix(4, 6);
    EXPECT_THROW(reconstruct(ckpt, base), std::domain_error);
    base.pop_back();
    EXPECT_THROW(reconstruct(ckpt, base), std::domain_error);
}

TEST(Reconstruct, LargeLayerReproducibleFromSeedAndCoefficients) {
    // m = n = 1024 with k = l = 1000: a seed plus 2000 coefficients.
    std::mt19937_64 gen(12);
    const std::size_t d = 1024;
    NolaFactor f = NolaFactor::initialized(SeedSpec{77}, d, d, 8, 1000, 1000, 1.0);
    f.beta = random_vector(1000, gen);
    AdaptedLinear layer{Matrix(d, d), {}, f};
    auto rec = record_from_layer(3, layer, CoeffEncoding::Float64);
    EXPECT_EQ(rec.param_count(), 2000u);
    TaskCheckpoint ckpt{kCheckpointVersion, "big", {rec}};
    const std::vector<Matrix> base{layer.weight};
    const DeltaOptions opts{{64, 1}, nullptr};
    auto direct = merge(AdaptedLinear{layer.weight, {}, delta_from_record(rec)}, opts);
    EXPECT_EQ(reconstruct(deserialize(serialize(ckpt)), base, {64, 1})[0], direct);
}

TEST(RecordFromLayer, Float32RoundsCoefficientsAndBias) {
    std::mt19937_64 gen(13);
    NolaFactor f = NolaFactor::initialized(SeedSpec{5}, 6, 4, 2, 3, 3, 1.0);
    f.beta = random_vector(3, gen);
    AdaptedLinear layer{Matrix(6, 4), random_vector(4, gen), f};
    auto rec = record_from_layer(0, layer);
    EXPECT_EQ(rec.encoding, CoeffEncoding::Float32);
    for (double v : rec.vectors[1]) EXPECT_EQ(v, static_cast<float>(v));
    for (double v : rec.bias) EXPECT_EQ(v, static_cast<float>(v));
    TaskCheckpoint ckpt{kCheckpointVersion, "", {rec}};
    EXPECT_EQ(deserialize(serialize(ckpt)), ckpt);
}

TEST(RecordFromLayer, DenseLayerRejected) {
    AdaptedLinear layer{Matrix(2, 2), {}, {}};
    EXPECT_THROW(record_from_layer(0, layer), std::domain_error);
}

TEST(PtqCheckpoint, SixteenBitsIsPassthrough) {
    std::mt19937_64 gen(14);
    auto ckpt = mixed_checkpoint(gen);
    EXPECT_EQ(serialize(ptq_checkpoint(ckpt, 16)), serialize(ckpt));
    EXPECT_THROW(ptq_checkpoint(ckpt, 1), std::domain_error);
    EXPECT_THROW(ptq_checkpoint(ckpt, 9), std::domain_error);
}

TEST(PtqCheckpoint, FourBitPayloadIsEightTimesSmallerThanFloat32) {
    std::mt19937_64 gen(15);
    TaskCheckpoint f32;
    f32.layers.push_back(nola_record(0, 64, 64, 4096, gen, CoeffEncoding::Float32));
    auto q4 = ptq_checkpoint(f32, 4);
    const auto overhead = serialize(TaskCheckpoint{}).size() + kLayerHeaderBytes;
    const double f32_payload = static_cast<double>(serialize(f32).size() - overhead);
    const double q4_payload = static_cast<double>(serialize(q4).size() - overhead);
    EXPECT_EQ(f32_payload, 8192.0 * 4);
    EXPECT_EQ(q4_payload, 2 * (16 + 2048));
    EXPECT_NEAR(f32_payload / q4_payload, 8.0, 0.1);
}

TEST(Report, CompressionRatiosNolaVersusLoraR1) {
    std::mt19937_64 gen(16);
    TaskCheckpoint nola_ckpt;
    nola_ckpt.layers.push_back(nola_record(0, 1024, 1024, 128, gen, CoeffEncoding::Float32));
    TaskCheckpoint lora_ckpt;
    LayerRecord lora;
    lora.method = Method::Lora;
    lora.m = lora.n = 1024;
    lora.r = 1;
    lora.vectors = {std::vector<double>(1024, 0.0), std::vector<double>(1024, 0.0)};
    lora_ckpt.layers.push_back(lora);

    const std::vector<std::pair<std::string, TaskCheckpoint>> store{{"nola", nola_ckpt}, {"lora", lora_ckpt}};
    auto manifest = report(store);
    ASSERT_EQ(manifest.entries.size(), 2u);
    EXPECT_EQ(manifest.entries[0].trainable_params, 256u);
    EXPECT_EQ(manifest.entries[0].compression_ratio, 4096.0);
    EXPECT_EQ(manifest.entries[1].trainable_params, 2048u);
    EXPECT_EQ(manifest.entries[1].compression_ratio, 512.0);
    EXPECT_EQ(manifest.entries[0].bytes, serialize(nola_ckpt).size());
    EXPECT_EQ(manifest.entries[1].trainable_params / manifest.entries[0].trainable_params, 8u);
}

TEST(Report, EmptyStoreGivesEmptyManifest) {
    EXPECT_TRUE(report({}).entries.empty());
}

TEST(InfoDump, CanonicalLines) {
    std::mt19937_64 gen(17);
    auto dump = info_dump(mixed_checkpoint(gen));
    EXPECT_EQ(dump,
              "model toy-base version 1 layers 3\n"
              "layer 0 nola 8x6 r=2 k=5 l=5 params 10 float64\n"
              "layer 1 lora 6x4 r=2 params 20 float64\n"
              "layer 2 pranc 4x3 p=7 params 7 quantized:3\n");
}

TEST(CheckpointFile, WriteThenReadMatchesAndSizeIsExact) {
    std::mt19937_64 gen(18);
    auto ckpt = mixed_checkpoint(gen);
    const auto path = std::filesystem::temp_directory_path() / "nola_test_ckpt.nola";
    write_checkpoint_file(path, ckpt);
    EXPECT_EQ(read_checkpoint_file(path), ckpt);
    EXPECT_EQ(std::filesystem::file_size(path), serialize(ckpt).size());
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    std::filesystem::remove(path);
    EXPECT_THROW(read_checkpoint_file(path), format_error);
}
