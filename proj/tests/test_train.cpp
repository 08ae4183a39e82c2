#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nola/train.hpp"

using namespace nola;

namespace {

void put_be32(std::ofstream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    out.write(b, 4);
}

struct IdxFiles {
    std::filesystem::path images, labels;

    IdxFiles(const std::string& tag, std::uint32_t image_count, std::uint32_t label_count,
             std::uint32_t label_magic = 0x00000801) {
        const auto dir = std::filesystem::temp_directory_path();
        images = dir / ("nola_idx_" + tag + "_images");
        labels = dir / ("nola_idx_" + tag + "_labels");
        std::ofstream img(images, std::ios::binary);
        put_be32(img, 0x00000803);
        put_be32(img, image_count);
        put_be32(img, 28);
        put_be32(img, 28);
        for (std::uint32_t i = 0; i < image_count * 784; ++i) img.put(static_cast<char>(i % 256));
        std::ofstream lbl(labels, std::ios::binary);
        put_be32(lbl, label_magic);
        put_be32(lbl, label_count);
        for (std::uint32_t i = 0; i < label_count; ++i) lbl.put(static_cast<char>(i % 10));
    }
    ~IdxFiles() {
        std::filesystem::remove(images);
        std::filesystem::remove(labels);
    }
};

ModelConfig small_config(Method method) {
    ModelConfig cfg;
    cfg.method = method;
    cfg.input_features = 24;
    cfg.hidden = 16;
    cfg.classes = 4;
    cfg.params_per_layer = {12, 12};
    cfg.rank = 2;
    cfg.seed = 9;
    return cfg;
}

Dataset small_data() { return synth_dataset(4, 40, 3, 24); }

TrainConfig small_train(std::size_t epochs) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 32;
    tc.learning_rate = 0.05;
    tc.seed = 17;
    return tc;
}

}  // namespace

TEST(LoadIdx, ReadsPixelsAndLabels) {
    IdxFiles files("good", 3, 3);
    auto ds = load_idx(files.images, files.labels);
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.features.rows(), 3u);
    EXPECT_EQ(ds.features.cols(), 784u);
    EXPECT_EQ(ds.features(0, 0), 0.0);
    EXPECT_EQ(ds.features(0, 255), 1.0);  // pixel 255
    EXPECT_EQ(ds.features(0, 51), 51.0 / 255.0);
    EXPECT_EQ(ds.labels, (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(LoadIdx, WrongLabelMagicIsFormatError) {
    IdxFiles files("magic", 2, 2, 0x00000803);
    EXPECT_THROW(load_idx(files.images, files.labels), format_error);
}

TEST(LoadIdx, SwappedFilesAreFormatError) {
    IdxFiles files("swapped", 2, 2);
    EXPECT_THROW(load_idx(files.labels, files.images), format_error);
}

TEST(LoadIdx, CountMismatchIsDomainError) {
    IdxFiles files("count", 3, 2);
    EXPECT_THROW(load_idx(files.images, files.labels), std::domain_error);
}

TEST(LoadIdx, MissingFileIsFormatError) {
    EXPECT_THROW(load_idx("/nonexistent/images", "/nonexistent/labels"), format_error);
    EXPECT_FALSE(mnist_available("/nonexistent"));
}

TEST(SynthDataset, EmptyWhenNoSamples) {
    auto ds = synth_dataset(10, 0, 1);
    EXPECT_EQ(ds.size(), 0u);
    EXPECT_EQ(ds.features.rows(), 0u);
}

TEST(SynthDataset, DeterministicAndLabelled) {
    auto a = synth_dataset(10, 20, 5);
    auto b = synth_dataset(10, 20, 5);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.features.cols(), 784u);
    EXPECT_EQ(a.labels[19], 0u);
    EXPECT_EQ(a.labels[20], 1u);
    EXPECT_NE(synth_dataset(10, 20, 6).features, a.features);
}

TEST(SynthDataset, LinearProbeSeparatesClasses) {
    // Softmax regression on 10 classes x 100 samples.
    auto ds = synth_dataset(10, 100, 1);
    Matrix w(784, 10);
    std::vector<double> b(10, 0.0);
    for (int step = 0; step < 100; ++step) {
        Matrix logits = matmul(ds.features, w);
        add_bias(logits, b);
        auto ce = cross_entropy(logits, ds.labels);
        Matrix gw = matmul_tn(ds.features, ce.grad);
        add_scaled(w.data(), gw.data(), -0.1);
        for (std::size_t i = 0; i < ce.grad.rows(); ++i)
            for (std::size_t j = 0; j < 10; ++j) b[j] -= 0.1 * ce.grad(i, j);
    }
    Matrix logits = matmul(ds.features, w);
    add_bias(logits, b);
    auto ce = cross_entropy(logits, ds.labels);
    EXPECT_GE(static_cast<double>(ce.correct) / ds.size(), 0.95);
}

TEST(CrossEntropy, UniformLogitsGiveLnClasses) {
    Matrix logits(3, 10);
    std::vector<std::uint32_t> labels{0, 4, 9};
    auto ce = cross_entropy(logits, labels);
    EXPECT_NEAR(ce.loss, std::log(10.0), 1e-15);
    EXPECT_NEAR(ce.loss, 2.302585, 1e-6);
    EXPECT_NEAR(ce.grad(0, 0), (0.1 - 1.0) / 3, 1e-15);
    EXPECT_NEAR(ce.grad(0, 1), 0.1 / 3, 1e-15);
}

TEST(CrossEntropy, LargeMarginGivesZeroLoss) {
    Matrix logits(1, 10);
    logits(0, 3) = 1000.0;
    std::vector<std::uint32_t> labels{3};
    auto ce = cross_entropy(logits, labels);
    EXPECT_EQ(ce.loss, 0.0);
    EXPECT_EQ(ce.correct, 1u);
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
    Matrix logits(1, 10);
    std::vector<std::uint32_t> labels{10};
    EXPECT_THROW(cross_entropy(logits, labels), std::domain_error);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> dist(0.0, 2.0);
    Matrix logits(5, 10);
    for (double& v : logits.data()) v = dist(gen);
    std::vector<std::uint32_t> labels{1, 0, 9, 5, 5};
    auto ce = cross_entropy(logits, labels);
    const double h = 1e-5;
    double num2 = 0.0, err2 = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        Matrix plus = logits, minus = logits;
        plus.data()[i] += h;
        minus.data()[i] -= h;
        const double fd = (cross_entropy(plus, labels).loss - cross_entropy(minus, labels).loss) / (2 * h);
        err2 += (fd - ce.grad.data()[i]) * (fd - ce.grad.data()[i]);
        num2 += fd * fd;
    }
    EXPECT_LE(std::sqrt(err2 / num2), 1e-6);
}

TEST(MakeMlp, ShapesAndBudgets) {
    auto model = make_mlp(small_config(Method::Nola));
    EXPECT_EQ(model.layers[0].weight.rows(), 24u);
    EXPECT_EQ(model.layers[0].weight.cols(), 16u);
    EXPECT_EQ(model.layers[1].weight.cols(), 4u);
    EXPECT_EQ(model_param_count(model), 24u);
    const auto& f = std::get<NolaFactor>(model.layers[0].delta);
    EXPECT_EQ(f.k, 6u);
    EXPECT_EQ(f.l, 6u);
    EXPECT_EQ(model_param_count(make_mlp(small_config(Method::Pranc))), 24u);
    EXPECT_EQ(model_param_count(make_mlp(small_config(Method::Lora))), 2u * (24 + 16) + 2u * (16 + 4));
}

TEST(MakeMlp, FullSizeDefaults) {
    ModelConfig cfg;
    auto model = make_mlp(cfg);
    EXPECT_EQ(model.layers[0].weight.rows(), 784u);
    EXPECT_EQ(model.layers[0].weight.cols(), 256u);
    EXPECT_EQ(model.layers[1].weight.cols(), 10u);
    EXPECT_EQ(model_param_count(model), 64u);
    EXPECT_EQ(std::get<NolaFactor>(model.layers[1].delta).r, 4u);
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
    auto model = make_mlp(small_config(Method::Nola));
    auto tc = small_train(3);
    tc.learning_rate = 0.0;
    auto trace = train(model, small_data(), tc);
    ASSERT_EQ(trace.epochs.size(), 4u);
    for (const auto& e : trace.epochs) EXPECT_EQ(e.loss, trace.initial_loss());
}

TEST(Train, ZeroEpochsReportsInitialLoss) {
    auto model = make_mlp(small_config(Method::Pranc));
    auto trace = train(model, small_data(), small_train(0));
    ASSERT_EQ(trace.epochs.size(), 1u);
    EXPECT_EQ(trace.final_loss(), trace.initial_loss());
}

TEST(Train, InitialLossMatchesFunctionPreservingStart) {
    // Every reparameterization starts with a zero delta, so all methods share
    // the base model's loss.
    auto data = small_data();
    const double dense = evaluate(make_mlp(small_config(Method::Dense)), data).loss;
    for (auto m : {Method::Nola, Method::Lora, Method::Pranc})
        EXPECT_EQ(evaluate(make_mlp(small_config(m)), data).loss, dense) << method_name(m);
}

TEST(Train, FrozenBaseIsBitwiseUnchanged) {
    auto data = small_data();
    for (auto m : {Method::Nola, Method::Lora, Method::Pranc}) {
        auto model = make_mlp(small_config(m));
        const Matrix w0 = model.layers[0].weight, w1 = model.layers[1].weight;
        const auto bias0 = model.layers[0].bias;
        train(model, data, small_train(2));
        EXPECT_EQ(model.layers[0].weight, w0) << method_name(m);
        EXPECT_EQ(model.layers[1].weight, w1) << method_name(m);
        EXPECT_NE(model.layers[0].bias, bias0) << method_name(m);
    }
}

TEST(Train, DeterministicGivenSeed) {
    auto data = small_data();
    for (auto m : {Method::Nola, Method::Pranc}) {
        auto a = make_mlp(small_config(m));
        auto b = make_mlp(small_config(m));
        auto ta = train(a, data, small_train(3));
        auto tb = train(b, data, small_train(3));
        for (std::size_t e = 0; e < ta.epochs.size(); ++e) EXPECT_EQ(ta.epochs[e].loss, tb.epochs[e].loss);
    }
}

TEST(Train, CachedBasesMatchStreamedBases) {
    auto data = small_data();
    auto a = make_mlp(small_config(Method::Nola));
    auto b = make_mlp(small_config(Method::Nola));
    auto tc = small_train(2);
    auto ta = train(a, data, tc);
    tc.cache_bases = true;
    auto tb = train(b, data, tc);
    for (std::size_t e = 0; e < ta.epochs.size(); ++e) EXPECT_EQ(ta.epochs[e].loss, tb.epochs[e].loss);
}

TEST(Train, FirstEpochImprovesOnInitialLoss) {
    auto data = small_data();
    for (auto m : {Method::Dense, Method::Nola, Method::Lora, Method::Pranc}) {
        auto model = make_mlp(small_config(m));
        auto trace = train(model, data, small_train(1));
        EXPECT_LT(trace.epochs[1].loss, trace.initial_loss()) << method_name(m);
    }
}

TEST(Train, AdamStateCoversEveryTrainableValue) {
    auto data = small_data();
    for (auto m : {Method::Dense, Method::Nola, Method::Lora, Method::Pranc}) {
        auto model = make_mlp(small_config(m));
        auto tc = small_train(1);
        tc.optimizer = OptimizerKind::Adam;
        tc.learning_rate = 1e-3;
        auto trace = train(model, data, tc);
        const std::uint64_t biases = model.layers[0].bias.size() + model.layers[1].bias.size();
        EXPECT_EQ(trace.optimizer_state, model_param_count(model) + biases) << method_name(m);
    }
    auto model = make_mlp(small_config(Method::Nola));
    EXPECT_EQ(train(model, data, small_train(1)).optimizer_state, 0u);
}

TEST(Train, DenseTrainingBeatsReparameterizedVariants) {
    auto data = small_data();
    auto dense = make_mlp(small_config(Method::Dense));
    const double dense_loss = train(dense, data, small_train(10)).final_loss();
    for (auto m : {Method::Nola, Method::Lora, Method::Pranc}) {
        auto model = make_mlp(small_config(m));
        EXPECT_LT(dense_loss, train(model, data, small_train(10)).final_loss()) << method_name(m);
    }
}

TEST(Train, QatTrainsMastersAndEvaluatesQuantized) {
    auto data = small_data();
    auto model = make_mlp(small_config(Method::Nola));
    auto tc = small_train(2);
    tc.qat = QuantSpec{3};
    auto trace = train(model, data, tc);
    EXPECT_LT(trace.final_loss(), trace.initial_loss());
    EXPECT_EQ(trace.final_loss(), evaluate_quantized(model, data, QuantSpec{3}).loss);
}

TEST(Train, FeatureMismatchThrows) {
    auto model = make_mlp(small_config(Method::Nola));
    EXPECT_THROW(train(model, synth_dataset(4, 5, 1, 10), small_train(1)), std::domain_error);
}

TEST(TrainTrace, CsvHeaderAndRows) {
    auto model = make_mlp(small_config(Method::Nola));
    auto trace = train(model, small_data(), small_train(2));
    std::ostringstream os;
    trace.write_csv(os);
    std::string line;
    std::istringstream in(os.str());
    std::getline(in, line);
    EXPECT_EQ(line, "epoch,loss,acc,ms_per_batch");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST(Checkpoint, ExportReconstructPreservesLoss) {
    auto data = small_data();
    for (auto m : {Method::Nola, Method::Lora, Method::Pranc}) {
        auto cfg = small_config(m);
        auto model = make_mlp(cfg);
        train(model, data, small_train(3));
        const double in_memory = evaluate(model, data).loss;
        auto ckpt = deserialize(serialize(export_checkpoint(model, CoeffEncoding::Float64)));
        const double restored = evaluate(model_from_checkpoint(cfg, ckpt), data).loss;
        EXPECT_LE(std::abs(restored - in_memory), 1e-10) << method_name(m);
    }
}

TEST(Checkpoint, WrongBaseModelRejected) {
    auto cfg = small_config(Method::Nola);
    auto ckpt = export_checkpoint(make_mlp(cfg));
    cfg.seed += 1;
    EXPECT_THROW(model_from_checkpoint(cfg, ckpt), std::domain_error);
}
