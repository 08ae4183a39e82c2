#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nola/errors.hpp"
#include "nola/matrix.hpp"
#include "nola/random.hpp"

namespace nola {

inline constexpr std::size_t kImageFeatures = 28 * 28;
inline constexpr std::size_t kNumClasses = 10;

/// Feature rows with integer class labels.
struct Dataset {
    Matrix features;                   // N x features
    std::vector<std::uint32_t> labels; // N
    std::size_t num_classes = kNumClasses;

    std::size_t size() const { return labels.size(); }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& file, std::size_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw format_error("truncated IDX header in " + file, offset);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace detail

/// Reads an IDX image/label file pair (MNIST layout). Pixels are scaled to
/// [0, 1] by dividing by 255.
inline Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw format_error("cannot open " + images_path.string(), 0);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw format_error("cannot open " + labels_path.string(), 0);

    const auto img_name = images_path.string();
    const auto lbl_name = labels_path.string();
    if (detail::read_be32(images, img_name, 0) != 0x00000803)
        throw format_error("bad IDX image magic in " + img_name, 0);
    const std::uint32_t count = detail::read_be32(images, img_name, 4);
    const std::uint32_t rows = detail::read_be32(images, img_name, 8);
    const std::uint32_t cols = detail::read_be32(images, img_name, 12);
    if (rows != 28 || cols != 28) throw format_error("unexpected image dims in " + img_name, 8);

    if (detail::read_be32(labels, lbl_name, 0) != 0x00000801)
        throw format_error("bad IDX label magic in " + lbl_name, 0);
    const std::uint32_t label_count = detail::read_be32(labels, lbl_name, 4);
    if (label_count != count)
        throw std::domain_error("IDX count mismatch: " + std::to_string(count) + " images, " +
                                std::to_string(label_count) + " labels");

    Dataset ds;
    ds.features = Matrix(count, kImageFeatures);
    std::vector<unsigned char> pixels(kImageFeatures);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
            throw format_error("truncated pixel data in " + img_name, 16 + std::size_t{i} * kImageFeatures);
        auto row = ds.features.row(i);
        for (std::size_t p = 0; p < kImageFeatures; ++p) row[p] = pixels[p] / 255.0;
    }
    ds.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const int c = labels.get();
        if (c == std::char_traits<char>::eof()) throw format_error("truncated label data in " + lbl_name, 8 + i);
        if (c >= static_cast<int>(kNumClasses))
            throw format_error("label out of range in " + lbl_name, 8 + i);
        ds.labels[i] = static_cast<std::uint32_t>(c);
    }
    return ds;
}

/// Standard MNIST training file names inside `dir`, if both exist.
inline bool mnist_available(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / "train-images-idx3-ubyte") &&
           std::filesystem::exists(dir / "train-labels-idx1-ubyte");
}

inline Dataset load_mnist_train(const std::filesystem::path& dir) {
    return load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
}

/// Gaussian blobs: class c is centred on a seeded random unit vector scaled by
/// 3, with isotropic unit noise. Samples are ordered class by class.
inline Dataset synth_dataset(std::size_t classes, std::size_t per_class, std::uint64_t seed,
                             std::size_t features = kImageFeatures) {
    Dataset ds;
    ds.num_classes = classes;
    ds.features = Matrix(classes * per_class, features);
    ds.labels.reserve(classes * per_class);
    SeedSpec base{seed, MatrixRole::Data};
    std::vector<double> center(features);
    for (std::size_t c = 0; c < classes; ++c) {
        RngStream centers(base.with_index(c));
        double norm2 = 0.0;
        for (double& v : center) {
            v = centers.standard_normal();
            norm2 += v * v;
        }
        const double scale = 3.0 / std::sqrt(norm2);
        for (double& v : center) v *= scale;

        SeedSpec noise_seed = base.with_index(c);
        noise_seed.chunk_index = 1;
        RngStream noise(noise_seed);
        for (std::size_t s = 0; s < per_class; ++s) {
            auto row = ds.features.row(c * per_class + s);
            for (std::size_t f = 0; f < features; ++f) row[f] = center[f] + noise.standard_normal();
            ds.labels.push_back(static_cast<std::uint32_t>(c));
        }
    }
    return ds;
}

}  // namespace nola
