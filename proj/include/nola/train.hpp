#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nola/accounting.hpp"
#include "nola/data.hpp"
#include "nola/layers.hpp"
#include "nola/quant.hpp"
#include "nola/task_store.hpp"

namespace nola {

struct ModelConfig {
    Method method = Method::Nola;
    std::size_t input_features = kImageFeatures;
    std::size_t hidden = 256;
    std::size_t classes = kNumClasses;
    /// Coefficient budget per layer for NOLA (split k = ceil(p/2), l = floor(p/2))
    /// and PRANC (p bases). Ignored by dense and LoRA.
    std::array<std::size_t, 2> params_per_layer{32, 32};
    std::size_t rank = 4;  // NOLA and LoRA
    double c = 1.0;
    std::uint64_t seed = 0;
    Sharing sharing = Sharing::Unique;
};

/// input -> Linear(+bias) -> ReLU -> Linear(+bias) -> logits.
struct MlpModel {
    std::array<AdaptedLinear, 2> layers;
    ModelConfig config;
};

/// Frozen base weight for layer `layer_id`, uniform in +-1/sqrt(fan_in).
inline Matrix base_weight(std::uint64_t seed, std::uint64_t layer_id, std::size_t m, std::size_t n) {
    SeedSpec spec{seed, MatrixRole::Init, layer_id};
    RngStream stream(spec);
    const double bound = 1.0 / std::sqrt(static_cast<double>(m));
    Matrix w(m, n);
    for (double& v : w.data()) v = bound * (2.0 * stream.next_uniform() - 1.0);
    return w;
}

inline std::string base_model_id(const ModelConfig& cfg) {
    return "mlp-" + std::to_string(cfg.input_features) + "-" + std::to_string(cfg.hidden) + "-" +
           std::to_string(cfg.classes) + "-seed" + std::to_string(cfg.seed);
}

inline MlpModel make_mlp(const ModelConfig& cfg) {
    MlpModel model;
    model.config = cfg;
    const std::array<std::pair<std::size_t, std::size_t>, 2> shapes{
        {{cfg.input_features, cfg.hidden}, {cfg.hidden, cfg.classes}}};
    for (std::size_t i = 0; i < 2; ++i) {
        const auto [m, n] = shapes[i];
        auto& layer = model.layers[i];
        layer.weight = base_weight(cfg.seed, i, m, n);
        layer.bias.assign(n, 0.0);
        SeedSpec seed{cfg.seed, MatrixRole::A, i, 0, 0, cfg.sharing};
        const std::size_t p = cfg.params_per_layer[i];
        switch (cfg.method) {
            case Method::Dense: layer.base_trainable = true; break;
            case Method::Nola:
                if (p < 2) throw std::domain_error("NOLA needs at least 2 parameters per layer");
                layer.delta = NolaFactor::initialized(seed, m, n, cfg.rank, p - p / 2, p / 2, cfg.c);
                break;
            case Method::Lora: layer.delta = LoraFactor::initialized(seed, m, n, cfg.rank, cfg.c); break;
            case Method::Pranc: layer.delta = PrancFactor::initialized(seed, m, n, p); break;
        }
    }
    return model;
}

/// Mean softmax cross-entropy and its gradient (softmax - onehot) / batch.
struct LossResult {
    double loss = 0.0;
    Matrix grad;
    std::size_t correct = 0;
};

inline LossResult cross_entropy(const Matrix& logits, std::span<const std::uint32_t> labels) {
    if (logits.rows() != labels.size()) throw std::domain_error("cross_entropy: batch size mismatch");
    LossResult out{0.0, Matrix(logits.rows(), logits.cols()), 0};
    const double inv_batch = logits.rows() ? 1.0 / static_cast<double>(logits.rows()) : 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (labels[i] >= logits.cols())
            throw std::domain_error("cross_entropy: label " + std::to_string(labels[i]) + " out of range");
        auto row = logits.row(i);
        const auto argmax = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (argmax == labels[i]) ++out.correct;
        const double peak = row[argmax];
        double sum = 0.0;
        for (double z : row) sum += std::exp(z - peak);
        const double log_sum = peak + std::log(sum);
        out.loss += log_sum - row[labels[i]];
        auto grad = out.grad.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) grad[j] = std::exp(row[j] - log_sum) * inv_batch;
        grad[labels[i]] -= inv_batch;
    }
    out.loss *= inv_batch;
    return out;
}

/// Per-layer pre-generated bases, used when TrainConfig::cache_bases is set.
struct ModelCaches {
    std::array<std::optional<BasisCache>, 2> layers;

    DeltaOptions options(std::size_t i, const StreamOptions& stream) const {
        return {stream, layers[i] ? &*layers[i] : nullptr};
    }
};

inline ModelCaches build_caches(const MlpModel& model, const StreamOptions& stream) {
    ModelCaches caches;
    for (std::size_t i = 0; i < 2; ++i)
        std::visit(
            [&](const auto& f) {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, NolaFactor> || std::is_same_v<T, PrancFactor>)
                    caches.layers[i] = materialize(f, stream);
            },
            model.layers[i].delta);
    return caches;
}

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(x.row(idx[i]).begin(), x.cols(), out.row(i).begin());
    return out;
}

inline void relu_inplace(Matrix& x) {
    for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
}

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Loss and accuracy over the whole dataset, in fixed batch order.
inline Evaluation evaluate(const MlpModel& model, const Dataset& data, const StreamOptions& stream = {},
                           const ModelCaches* caches = nullptr, std::size_t batch_size = 512) {
    if (data.size() == 0) return {};
    // Deltas do not change during evaluation, so merge them once.
    std::array<Matrix, 2> merged;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& layer = model.layers[i];
        DeltaOptions opts = caches ? caches->options(i, stream) : DeltaOptions{stream, nullptr};
        merged[i] = layer.has_delta() ? merge(layer, opts) : layer.weight;
    }
    double total = 0.0;
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t len = std::min(batch_size, data.size() - start);
        idx.resize(len);
        std::iota(idx.begin(), idx.end(), start);
        Matrix h = forward_merged(merged[0], model.layers[0].bias, gather_rows(data.features, idx));
        relu_inplace(h);
        Matrix logits = forward_merged(merged[1], model.layers[1].bias, h);
        auto ce = cross_entropy(logits, std::span(data.labels).subspan(start, len));
        total += ce.loss * static_cast<double>(len);
        correct += ce.correct;
    }
    return {total / static_cast<double>(data.size()),
            static_cast<double>(correct) / static_cast<double>(data.size())};
}

enum class OptimizerKind { Sgd, Adam };

/// Trainable slots of a layer, in a fixed order: delta parameters (or the
/// dense weight), then bias.
inline void collect_params(AdaptedLinear& layer, std::vector<std::span<double>>& out) {
    std::visit(
        [&](auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NolaFactor>) {
                out.emplace_back(f.alpha);
                out.emplace_back(f.beta);
            } else if constexpr (std::is_same_v<T, LoraFactor>) {
                out.push_back(f.a.data());
                out.push_back(f.b.data());
            } else if constexpr (std::is_same_v<T, PrancFactor>) {
                out.emplace_back(f.theta);
            } else if (layer.base_trainable) {
                out.push_back(layer.weight.data());
            }
        },
        layer.delta);
    if (!layer.bias.empty()) out.emplace_back(layer.bias);
}

/// Gradients in the same order as collect_params.
inline void collect_grads(const AdaptedLinear& layer, LayerGradients& g, std::vector<std::span<const double>>& out) {
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NolaFactor>) {
                out.emplace_back(g.coeff_a);
                out.emplace_back(g.coeff_b);
            } else if constexpr (std::is_same_v<T, LoraFactor>) {
                out.push_back(g.lora_a.data());
                out.push_back(g.lora_b.data());
            } else if constexpr (std::is_same_v<T, PrancFactor>) {
                out.emplace_back(g.coeff_a);
            } else if (layer.base_trainable) {
                out.push_back(g.weight.data());
            }
        },
        layer.delta);
    if (!layer.bias.empty()) out.emplace_back(g.bias);
}

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) = 0;
    /// Number of per-parameter state slots (0 for SGD, one moment pair per
    /// parameter for Adam, counted once).
    virtual std::size_t state_size() const = 0;
};

class Sgd final : public Optimizer {
public:
    explicit Sgd(double lr) : lr_(lr) {}
    void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) override {
        for (std::size_t s = 0; s < params.size(); ++s)
            for (std::size_t i = 0; i < params[s].size(); ++i) params[s][i] -= lr_ * grads[s][i];
    }
    std::size_t state_size() const override { return 0; }

private:
    double lr_;
};

class Adam final : public Optimizer {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) override {
        if (first_.empty()) {
            for (const auto& p : params) {
                first_.emplace_back(p.size(), 0.0);
                second_.emplace_back(p.size(), 0.0);
            }
        }
        ++t_;
        const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t s = 0; s < params.size(); ++s) {
            for (std::size_t i = 0; i < params[s].size(); ++i) {
                const double g = grads[s][i];
                first_[s][i] = beta1_ * first_[s][i] + (1.0 - beta1_) * g;
                second_[s][i] = beta2_ * second_[s][i] + (1.0 - beta2_) * g * g;
                const double m_hat = first_[s][i] / correction1;
                const double v_hat = second_[s][i] / correction2;
                params[s][i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
            }
        }
    }
    std::size_t state_size() const override {
        std::size_t total = 0;
        for (const auto& v : first_) total += v.size();
        return total;
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> first_, second_;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 512;
    double learning_rate = 0.05;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    std::uint64_t seed = 0;
    bool cache_bases = false;
    StreamOptions stream{};
    /// Quantization-aware training: forward with fake-quantized delta
    /// parameters, update the full-precision masters.
    std::optional<QuantSpec> qat;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 0 = before training
    double loss = 0.0;
    double accuracy = 0.0;
    double ms_per_batch = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
    double total_seconds = 0.0;
    double mean_ms_per_batch = 0.0;
    std::size_t optimizer_state = 0;

    double initial_loss() const { return epochs.front().loss; }
    double final_loss() const { return epochs.back().loss; }
    double final_accuracy() const { return epochs.back().accuracy; }

    void write_csv(std::ostream& os) const {
        os << "epoch,loss,acc,ms_per_batch\n";
        os.precision(17);
        for (const auto& e : epochs) os << e.epoch << ',' << e.loss << ',' << e.accuracy << ',' << e.ms_per_batch << '\n';
    }
};

namespace detail {

/// Swaps fake-quantized values into the delta parameters; returns the
/// full-precision masters for restore_masters.
inline std::vector<std::vector<double>> swap_in_quantized(AdaptedLinear& layer, const QuantSpec& spec) {
    std::vector<std::span<double>> slots;
    std::visit(
        [&](auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NolaFactor>) {
                slots.emplace_back(f.alpha);
                slots.emplace_back(f.beta);
            } else if constexpr (std::is_same_v<T, LoraFactor>) {
                slots.push_back(f.a.data());
                slots.push_back(f.b.data());
            } else if constexpr (std::is_same_v<T, PrancFactor>) {
                slots.emplace_back(f.theta);
            }
        },
        layer.delta);
    std::vector<std::vector<double>> masters;
    for (auto slot : slots) {
        masters.emplace_back(slot.begin(), slot.end());
        auto q = fake_quantize(slot, spec);
        std::copy(q.begin(), q.end(), slot.begin());
    }
    return masters;
}

inline void restore_masters(AdaptedLinear& layer, const std::vector<std::vector<double>>& masters) {
    std::size_t s = 0;
    std::vector<std::span<double>> slots;
    collect_params(layer, slots);
    for (const auto& m : masters) std::copy(m.begin(), m.end(), slots[s++].begin());
}

}  // namespace detail

/// Mini-batch training with seeded Fisher-Yates shuffling per epoch. Epoch
/// losses are full-dataset evaluations after the epoch; entry 0 is the
/// initial model.
inline TrainTrace train(MlpModel& model, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw std::domain_error("train: batch size must be positive");
    if (data.features.cols() != model.layers[0].in_features())
        throw std::domain_error("train: dataset has " + std::to_string(data.features.cols()) +
                                " features, model expects " + std::to_string(model.layers[0].in_features()));
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();

    std::optional<ModelCaches> caches;
    if (cfg.cache_bases) caches = build_caches(model, cfg.stream);
    auto opts = [&](std::size_t i) { return caches ? caches->options(i, cfg.stream) : DeltaOptions{cfg.stream, nullptr}; };
    const ModelCaches* cache_ptr = caches ? &*caches : nullptr;

    std::unique_ptr<Optimizer> optimizer;
    if (cfg.optimizer == OptimizerKind::Adam) optimizer = std::make_unique<Adam>(cfg.learning_rate);
    else optimizer = std::make_unique<Sgd>(cfg.learning_rate);

    TrainTrace trace;
    auto initial = evaluate(model, data, cfg.stream, cache_ptr);
    trace.epochs.push_back({0, initial.loss, initial.accuracy, 0.0});

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double total_batch_ms = 0.0;
    std::size_t total_batches = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        SeedSpec shuffle_seed{cfg.seed, MatrixRole::Data, 0, epoch, 2};
        RngStream rng(shuffle_seed);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);

        double epoch_ms = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto t0 = clock::now();
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            std::span<const std::size_t> idx(order.data() + start, len);
            Matrix x = gather_rows(data.features, idx);
            std::vector<std::uint32_t> y(len);
            for (std::size_t i = 0; i < len; ++i) y[i] = data.labels[idx[i]];

            std::array<std::vector<std::vector<double>>, 2> masters;
            if (cfg.qat)
                for (std::size_t i = 0; i < 2; ++i) masters[i] = detail::swap_in_quantized(model.layers[i], *cfg.qat);

            std::array<ForwardContext, 2> ctx;
            Matrix h = forward(model.layers[0], x, opts(0), &ctx[0]);
            relu_inplace(h);
            Matrix logits = forward(model.layers[1], h, opts(1), &ctx[1]);
            auto ce = cross_entropy(logits, y);
            auto g1 = backward(model.layers[1], ctx[1], ce.grad, true, opts(1));
            for (std::size_t i = 0; i < h.size(); ++i)
                if (h.data()[i] <= 0.0) g1.input.data()[i] = 0.0;
            auto g0 = backward(model.layers[0], ctx[0], g1.input, false, opts(0));

            if (cfg.qat)
                for (std::size_t i = 0; i < 2; ++i) detail::restore_masters(model.layers[i], masters[i]);

            std::vector<std::span<double>> params;
            std::vector<std::span<const double>> grads;
            collect_params(model.layers[0], params);
            collect_params(model.layers[1], params);
            collect_grads(model.layers[0], g0, grads);
            collect_grads(model.layers[1], g1, grads);
            optimizer->step(params, grads);

            epoch_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            ++batches;
        }
        Evaluation ev;
        if (cfg.qat) {
            std::array<std::vector<std::vector<double>>, 2> masters;
            for (std::size_t i = 0; i < 2; ++i) masters[i] = detail::swap_in_quantized(model.layers[i], *cfg.qat);
            ev = evaluate(model, data, cfg.stream, cache_ptr);
            for (std::size_t i = 0; i < 2; ++i) detail::restore_masters(model.layers[i], masters[i]);
        } else {
            ev = evaluate(model, data, cfg.stream, cache_ptr);
        }
        trace.epochs.push_back({epoch, ev.loss, ev.accuracy, batches ? epoch_ms / batches : 0.0});
        total_batch_ms += epoch_ms;
        total_batches += batches;
    }
    trace.total_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
    trace.mean_ms_per_batch = total_batches ? total_batch_ms / total_batches : 0.0;
    trace.optimizer_state = optimizer->state_size();
    return trace;
}

/// Evaluation of the model with its delta parameters replaced by their
/// quantized values.
inline Evaluation evaluate_quantized(MlpModel model, const Dataset& data, const QuantSpec& spec,
                                     const StreamOptions& stream = {}) {
    for (auto& layer : model.layers) detail::swap_in_quantized(layer, spec);
    return evaluate(model, data, stream);
}

inline std::uint64_t model_param_count(const MlpModel& model) {
    return trainable_coefficients(model.layers[0]) + trainable_coefficients(model.layers[1]);
}

inline TaskCheckpoint export_checkpoint(const MlpModel& model, CoeffEncoding encoding = CoeffEncoding::Float32,
                                        int bits = 0) {
    TaskCheckpoint ckpt;
    ckpt.base_model_id = base_model_id(model.config);
    for (std::uint32_t i = 0; i < 2; ++i) ckpt.layers.push_back(record_from_layer(i, model.layers[i], encoding, bits));
    return ckpt;
}

/// Model with merged weights W + delta and biases taken from the checkpoint.
inline MlpModel model_from_checkpoint(const ModelConfig& base_cfg, const TaskCheckpoint& ckpt,
                                      const StreamOptions& stream = {}) {
    if (ckpt.base_model_id != base_model_id(base_cfg))
        throw std::domain_error("checkpoint targets " + ckpt.base_model_id + ", not " + base_model_id(base_cfg));
    ModelConfig dense_cfg = base_cfg;
    dense_cfg.method = Method::Dense;
    MlpModel model = make_mlp(dense_cfg);
    std::vector<Matrix> base{model.layers[0].weight, model.layers[1].weight};
    auto merged = reconstruct(ckpt, base, stream);
    for (std::size_t i = 0; i < 2; ++i) {
        model.layers[i].weight = std::move(merged[i]);
        model.layers[i].base_trainable = false;
        if (!ckpt.layers[i].bias.empty()) model.layers[i].bias = ckpt.layers[i].bias;
    }
    return model;
}

}  // namespace nola
