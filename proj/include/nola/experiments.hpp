#pragma once

// Desk-scale experiments behind the `nola` command-line tool. Each run
// returns an ExperimentResult and optionally writes CSV/JSON artifacts.
// Requires nlohmann/json.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nola/nola.hpp"

namespace nola {

/// Bad flags or flag combinations; the CLI maps it to exit code 2.
class usage_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentResult {
    std::string name;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    std::map<std::string, double> metrics;
    std::vector<std::string> artifacts;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["name"] = name;
        j["params"] = params;
        j["metrics"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : metrics) j["metrics"][k] = v;
        j["artifacts"] = artifacts;
        return j;
    }
};

/// Schema check for serialized results: a string name, an object of scalar or
/// array params, an object of numeric metrics, and an array of string paths.
inline bool matches_result_schema(const nlohmann::ordered_json& j) {
    if (!j.is_object() || j.size() != 4) return false;
    if (!j.contains("name") || !j["name"].is_string()) return false;
    if (!j.contains("params") || !j["params"].is_object()) return false;
    for (const auto& [k, v] : j["params"].items())
        if (v.is_object() || v.is_null()) return false;
    if (!j.contains("metrics") || !j["metrics"].is_object()) return false;
    for (const auto& [k, v] : j["metrics"].items())
        if (!v.is_number()) return false;
    if (!j.contains("artifacts") || !j["artifacts"].is_array()) return false;
    for (const auto& a : j["artifacts"])
        if (!a.is_string()) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Data

struct DataSpec {
    enum class Kind { Synth, Mnist };
    Kind kind = Kind::Synth;
    std::filesystem::path dir;      // MNIST directory
    std::size_t synth_samples = 5000;
    bool synth_fallback = false;    // use synth when MNIST files are missing

    std::string describe() const {
        return kind == Kind::Synth ? "synth:" + std::to_string(synth_samples) : "mnist:" + dir.string();
    }
};

/// Parses "synth", "mnist" (directory from NOLA_DATA_DIR) or "mnist:<dir>".
inline DataSpec parse_data_spec(const std::string& text) {
    DataSpec spec;
    if (text == "synth") return spec;
    spec.kind = DataSpec::Kind::Mnist;
    if (text == "mnist") {
        const char* env = std::getenv("NOLA_DATA_DIR");
        if (!env || !*env) throw usage_error("--data mnist needs a directory: use mnist:<dir> or set NOLA_DATA_DIR");
        spec.dir = env;
        return spec;
    }
    if (text.rfind("mnist:", 0) == 0 && text.size() > 6) {
        spec.dir = text.substr(6);
        return spec;
    }
    throw usage_error("--data must be synth, mnist or mnist:<dir>, got '" + text + "'");
}

/// Synth data uses 10 classes of synth_samples / 10 each.
inline Dataset load_dataset(const DataSpec& spec, std::uint64_t seed) {
    if (spec.kind == DataSpec::Kind::Mnist) {
        if (mnist_available(spec.dir)) return load_mnist_train(spec.dir);
        if (!spec.synth_fallback)
            throw usage_error("MNIST files not found in " + spec.dir.string() + " (pass --synth-fallback to use synth data)");
    }
    if (spec.synth_samples < kNumClasses) throw usage_error("--samples must be at least 10");
    return synth_dataset(kNumClasses, spec.synth_samples / kNumClasses, seed);
}

namespace detail {

inline std::filesystem::path artifact(const std::filesystem::path& dir, const std::string& file) {
    std::filesystem::create_directories(dir);
    return dir / file;
}

inline void write_json(const std::filesystem::path& path, ExperimentResult& res) {
    res.artifacts.push_back(path.string());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << res.to_json().dump(2) << '\n';
}

inline std::ofstream open_csv(const std::filesystem::path& path, ExperimentResult& res) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    res.artifacts.push_back(path.string());
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Toy MLP training

struct ToyOptions {
    Method method = Method::Nola;
    std::size_t params_per_layer = 32;
    std::size_t rank = 4;
    double c = 1.0;
    std::size_t epochs = 10;
    std::size_t batch_size = 512;
    double learning_rate = 0.05;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    std::uint64_t seed = 0;
    bool cache_bases = false;
    StreamOptions stream{};
    std::optional<QuantSpec> qat;

    /// Per-layer coefficient budget for the 784-256-10 MLP; LoRA ignores it.
    ModelConfig model_config() const {
        ModelConfig cfg;
        cfg.method = method;
        cfg.params_per_layer = {params_per_layer, params_per_layer};
        cfg.rank = rank;
        cfg.c = c;
        cfg.seed = seed;
        return cfg;
    }

    TrainConfig train_config() const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.optimizer = optimizer;
        tc.seed = seed;
        tc.cache_bases = cache_bases;
        tc.stream = stream;
        tc.qat = qat;
        return tc;
    }

    void validate() const {
        if (batch_size == 0) throw usage_error("--batch-size must be positive");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw usage_error("--lr must be >= 0");
        if (!std::isfinite(c)) throw usage_error("--c must be finite");
        if (method == Method::Nola && params_per_layer < 2) throw usage_error("NOLA needs --params-per-layer >= 2");
        if (method == Method::Pranc && params_per_layer < 1) throw usage_error("PRANC needs --params-per-layer >= 1");
        if ((method == Method::Nola || method == Method::Lora) && (rank == 0 || rank > 10))
            throw usage_error("--rank must be in [1, 10] for the 784-256-10 MLP");
        if (stream.chunk_size == 0 || stream.workers == 0) throw usage_error("chunk size and workers must be positive");
    }

    void describe(nlohmann::ordered_json& p) const {
        p["method"] = method_name(method);
        p["params_per_layer"] = params_per_layer;
        p["rank"] = rank;
        p["c"] = c;
        p["epochs"] = epochs;
        p["batch_size"] = batch_size;
        p["lr"] = learning_rate;
        p["optimizer"] = optimizer == OptimizerKind::Sgd ? "sgd" : "adam";
        p["seed"] = seed;
        if (qat) p["qat_bits"] = qat->bits;
    }
};

struct ToyRun {
    MlpModel model;
    TrainTrace trace;
};

inline ToyRun train_toy(const ToyOptions& opts, const Dataset& data) {
    opts.validate();
    ToyRun run{make_mlp(opts.model_config()), {}};
    run.trace = train(run.model, data, opts.train_config());
    return run;
}

/// Trains the MLP and reports final train loss and timing. Writes
/// train_<method>.csv (trace) and train_<method>.json when out_dir is set.
inline ExperimentResult run_train_toy(const ToyOptions& opts, const Dataset& data, const DataSpec& source,
                                      const std::filesystem::path& out_dir = {}) {
    ExperimentResult res;
    res.name = "train-toy";
    opts.describe(res.params);
    res.params["data"] = source.describe();
    res.params["samples"] = data.size();
    auto run = train_toy(opts, data);
    res.metrics["initial_train_loss"] = run.trace.initial_loss();
    res.metrics["final_train_loss"] = run.trace.final_loss();
    res.metrics["final_train_accuracy"] = run.trace.final_accuracy();
    res.metrics["total_seconds"] = run.trace.total_seconds;
    res.metrics["ms_per_batch"] = run.trace.mean_ms_per_batch;
    res.metrics["param_count"] = static_cast<double>(model_param_count(run.model));
    if (!out_dir.empty()) {
        const std::string stem = std::string("train_") + method_name(opts.method);
        auto csv = detail::open_csv(detail::artifact(out_dir, stem + ".csv"), res);
        run.trace.write_csv(csv);
        detail::write_json(detail::artifact(out_dir, stem + ".json"), res);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Subspace coverage

struct CoverageOptions {
    Method method = Method::Nola;
    std::size_t d = 16;
    std::vector<std::size_t> total_params{2, 4, 8, 16, 32, 64};
    std::size_t rank = 2;
    std::optional<std::size_t> samples;  // default 4 d^2
    std::uint64_t seed = 0;

    std::size_t sample_count() const { return samples.value_or(4 * d * d); }
};

struct CoverageRow {
    std::size_t total_params = 0, k = 0, l = 0, samples = 0, numerical_rank = 0, max_rank = 0;
    double coverage = 0.0;
};

/// Numerical rank of vectorized delta samples with standard normal
/// coefficients, for each budget in the sweep. NOLA splits a budget p as
/// k = p - p/2, l = p/2.
inline std::vector<CoverageRow> rank_coverage(const CoverageOptions& opts) {
    if (opts.method != Method::Nola && opts.method != Method::Pranc)
        throw usage_error("--method must be nola or pranc");
    if (opts.d == 0) throw usage_error("--d must be positive");
    if (opts.sample_count() < 1) throw usage_error("--samples must be at least 1");
    if (opts.method == Method::Nola && (opts.rank == 0 || opts.rank > opts.d))
        throw usage_error("--rank must be in [1, d]");
    const std::size_t d = opts.d;
    std::vector<CoverageRow> rows;
    for (std::size_t p : opts.total_params) {
        CoverageRow row;
        row.total_params = p;
        row.samples = opts.sample_count();
        row.max_rank = d * d;
        const SeedSpec basis_seed{opts.seed, MatrixRole::A};
        std::vector<Matrix> samples;
        samples.reserve(row.samples);
        if (opts.method == Method::Nola) {
            if (p < 2) throw usage_error("NOLA needs --total-params >= 2");
            row.k = p - p / 2;
            row.l = p / 2;
            NolaFactor f{basis_seed, d, d, opts.rank, row.k, row.l, std::vector<double>(row.k),
                         std::vector<double>(row.l), 1.0};
            const auto cache = materialize(f);
            for (std::size_t s = 0; s < row.samples; ++s) {
                RngStream rng(SeedSpec{opts.seed, MatrixRole::Data, 0, s, 3});
                for (double& a : f.alpha) a = rng.standard_normal();
                for (double& b : f.beta) b = rng.standard_normal();
                samples.push_back(nola_delta(f, {}, &cache));
            }
        } else {
            if (p < 1) throw usage_error("PRANC needs --total-params >= 1");
            row.k = p;
            PrancFactor f{basis_seed, d, d, p, std::vector<double>(p)};
            const auto cache = materialize(f);
            for (std::size_t s = 0; s < row.samples; ++s) {
                RngStream rng(SeedSpec{opts.seed, MatrixRole::Data, 0, s, 3});
                for (double& t : f.theta) t = rng.standard_normal();
                samples.push_back(pranc_delta(f, {}, &cache));
            }
        }
        row.numerical_rank = numerical_rank(samples);
        row.coverage = static_cast<double>(row.numerical_rank) / static_cast<double>(row.max_rank);
        rows.push_back(row);
    }
    return rows;
}

inline ExperimentResult run_rank_coverage(const CoverageOptions& opts, const std::filesystem::path& out_dir = {}) {
    ExperimentResult res;
    res.name = "rank-coverage";
    res.params["method"] = method_name(opts.method);
    res.params["d"] = opts.d;
    res.params["total_params"] = opts.total_params;
    res.params["rank"] = opts.rank;
    res.params["samples"] = opts.sample_count();
    res.params["seed"] = opts.seed;
    const auto rows = rank_coverage(opts);
    for (const auto& row : rows) {
        const std::string key = "@" + std::to_string(row.total_params);
        res.metrics["numerical_rank" + key] = static_cast<double>(row.numerical_rank);
        res.metrics["coverage" + key] = row.coverage;
    }
    if (!out_dir.empty()) {
        const std::string stem = std::string("rank_coverage_") + method_name(opts.method);
        auto csv = detail::open_csv(detail::artifact(out_dir, stem + ".csv"), res);
        csv << "method,d,rank,total_params,k,l,samples,numerical_rank,max_rank,coverage\n";
        for (const auto& row : rows)
            csv << method_name(opts.method) << ',' << opts.d << ',' << opts.rank << ',' << row.total_params << ','
                << row.k << ',' << row.l << ',' << row.samples << ',' << row.numerical_rank << ',' << row.max_rank
                << ',' << row.coverage << '\n';
        detail::write_json(detail::artifact(out_dir, stem + ".json"), res);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Reconstruction benchmark

struct BenchOptions {
    std::size_t d = 1024;
    std::size_t k = 1000;          // coefficient budget per method
    std::size_t rank = 8;
    std::size_t batches = 1;
    std::size_t chunk_size = 16;
    std::size_t batch_rows = 64;   // input rows per batch
    std::uint64_t seed = 0;
};

struct BenchReport {
    CostReport analytic;
    std::vector<double> nola_ms, pranc_ms;

    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }
    std::optional<double> measured_speedup() const {
        if (nola_ms.empty()) return std::nullopt;
        return mean(pranc_ms) / mean(nola_ms);
    }
};

/// Times forward + backward of one d x d layer per method, regenerating the
/// bases every pass. Both methods train k coefficients: PRANC uses k bases,
/// NOLA k - k/2 and k/2.
inline BenchReport bench(const BenchOptions& opts) {
    if (opts.d == 0 || opts.k < 2 || opts.rank == 0 || opts.rank > opts.d || opts.chunk_size == 0 ||
        opts.batch_rows == 0)
        throw usage_error("bench: need d > 0, k >= 2, 1 <= rank <= d, positive chunk size and batch rows");
    BenchReport rep;
    rep.analytic = cost_model(opts.d, opts.k, opts.rank);
    if (opts.batches == 0) return rep;

    const std::size_t d = opts.d;
    RngStream rng(SeedSpec{opts.seed, MatrixRole::Data, 0, 0, 4});
    auto random_matrix = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.data()) v = rng.standard_normal();
        return m;
    };
    auto random_vector = [&](std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) x = rng.standard_normal();
        return v;
    };
    const Matrix x = random_matrix(opts.batch_rows, d);
    const Matrix grad_out = random_matrix(opts.batch_rows, d);
    const Matrix w = base_weight(opts.seed, 0, d, d);
    const SeedSpec seed{opts.seed, MatrixRole::A};
    const std::size_t ka = opts.k - opts.k / 2, lb = opts.k / 2;
    AdaptedLinear nola_layer{w, {}, NolaFactor{seed, d, d, opts.rank, ka, lb, random_vector(ka), random_vector(lb), 1.0}};
    AdaptedLinear pranc_layer{w, {}, PrancFactor{seed, d, d, opts.k, random_vector(opts.k)}};
    const DeltaOptions delta_opts{{opts.chunk_size, 1}, nullptr};

    auto time_batch = [&](const AdaptedLinear& layer) {
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        ForwardContext ctx;
        Matrix y = forward(layer, x, delta_opts, &ctx);
        auto g = backward(layer, ctx, grad_out, false, delta_opts);
        const auto ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        if (y.size() == 0 || g.coeff_a.empty()) throw std::runtime_error("bench: empty result");
        return ms;
    };
    for (std::size_t b = 0; b < opts.batches; ++b) {
        rep.nola_ms.push_back(time_batch(nola_layer));
        rep.pranc_ms.push_back(time_batch(pranc_layer));
    }
    return rep;
}

inline ExperimentResult run_bench(const BenchOptions& opts, const std::filesystem::path& out_dir = {}) {
    ExperimentResult res;
    res.name = "bench";
    res.params["d"] = opts.d;
    res.params["k"] = opts.k;
    res.params["rank"] = opts.rank;
    res.params["batches"] = opts.batches;
    res.params["chunk_size"] = opts.chunk_size;
    res.params["batch_rows"] = opts.batch_rows;
    res.params["seed"] = opts.seed;
    const auto rep = bench(opts);
    res.metrics["analytic_speedup"] = rep.analytic.speedup;
    res.metrics["pranc_flops"] = static_cast<double>(rep.analytic.pranc_flops);
    res.metrics["nola_flops"] = static_cast<double>(rep.analytic.nola_flops);
    if (auto s = rep.measured_speedup()) {
        res.metrics["nola_ms_per_batch"] = BenchReport::mean(rep.nola_ms);
        res.metrics["pranc_ms_per_batch"] = BenchReport::mean(rep.pranc_ms);
        res.metrics["measured_speedup"] = *s;
    }
    if (!out_dir.empty()) {
        auto csv = detail::open_csv(detail::artifact(out_dir, "bench.csv"), res);
        csv << "batch,nola_ms,pranc_ms\n";
        for (std::size_t b = 0; b < rep.nola_ms.size(); ++b)
            csv << b << ',' << rep.nola_ms[b] << ',' << rep.pranc_ms[b] << '\n';
        detail::write_json(detail::artifact(out_dir, "bench.json"), res);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Quantization sweep

enum class QuantMode { Ptq, Qat };

struct QuantSweepOptions {
    ToyOptions toy;                 // method is ignored: NOLA and LoRA both run
    std::vector<int> bits{8, 4, 3, 2};
    QuantMode mode = QuantMode::Ptq;
    std::size_t lora_rank = 1;      // NOLA gets the same per-layer budget
};

struct QuantRow {
    Method method = Method::Nola;
    int bits = 0;
    double fp_loss = 0.0;
    double loss = 0.0;
    double degradation() const { return loss - fp_loss; }
};

namespace detail {

/// LoRA rank r and a NOLA model with the same coefficient count per layer.
inline std::pair<ToyOptions, ToyOptions> matched_toy(const QuantSweepOptions& opts) {
    ToyOptions lora = opts.toy;
    lora.method = Method::Lora;
    lora.rank = opts.lora_rank;
    ToyOptions nola = opts.toy;
    nola.method = Method::Nola;
    return {nola, lora};
}

inline ModelConfig matched_nola_config(const ToyOptions& nola, std::size_t lora_rank) {
    ModelConfig cfg = nola.model_config();
    cfg.params_per_layer = {lora_rank * (kImageFeatures + 256), lora_rank * (256 + kNumClasses)};
    return cfg;
}

}  // namespace detail

inline std::vector<QuantRow> quant_sweep(const QuantSweepOptions& opts, const Dataset& data) {
    for (int b : opts.bits) {
        if (b == 16 && opts.mode == QuantMode::Ptq) continue;
        if (b < 2 || b > 8) throw usage_error("--bits values must be in [2, 8] (16 = passthrough for ptq)");
    }
    if (opts.lora_rank == 0 || opts.lora_rank > 10) throw usage_error("--lora-rank must be in [1, 10]");
    auto [nola, lora] = detail::matched_toy(opts);
    nola.validate();
    lora.validate();
    std::vector<QuantRow> rows;
    for (const auto& toy : {nola, lora}) {
        const ModelConfig cfg =
            toy.method == Method::Nola ? detail::matched_nola_config(toy, opts.lora_rank) : toy.model_config();
        MlpModel model = make_mlp(cfg);
        train(model, data, toy.train_config());
        const auto ckpt = export_checkpoint(model, CoeffEncoding::Float64);
        const double fp_loss = evaluate(model_from_checkpoint(cfg, ckpt, toy.stream), data, toy.stream).loss;
        for (int b : opts.bits) {
            QuantRow row{toy.method, b, fp_loss, 0.0};
            if (opts.mode == QuantMode::Ptq) {
                row.loss = evaluate(model_from_checkpoint(cfg, ptq_checkpoint(ckpt, b), toy.stream), data, toy.stream).loss;
            } else {
                MlpModel q = make_mlp(cfg);
                auto tc = toy.train_config();
                tc.qat = QuantSpec{b};
                row.loss = train(q, data, tc).final_loss();
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline ExperimentResult run_quant_sweep(const QuantSweepOptions& opts, const Dataset& data, const DataSpec& source,
                                        const std::filesystem::path& out_dir = {}) {
    ExperimentResult res;
    res.name = "quant-sweep";
    opts.toy.describe(res.params);
    res.params.erase("method");
    res.params["mode"] = opts.mode == QuantMode::Ptq ? "ptq" : "qat";
    res.params["bits"] = opts.bits;
    res.params["lora_rank"] = opts.lora_rank;
    res.params["data"] = source.describe();
    const auto rows = quant_sweep(opts, data);
    for (const auto& row : rows) {
        const std::string key = std::string(method_name(row.method)) + "@" + std::to_string(row.bits);
        res.metrics["loss_" + key] = row.loss;
        res.metrics["degradation_" + key] = row.degradation();
    }
    for (const auto& row : rows) res.metrics[std::string("fp_loss_") + method_name(row.method)] = row.fp_loss;
    if (!out_dir.empty()) {
        const std::string stem = std::string("quant_") + (opts.mode == QuantMode::Ptq ? "ptq" : "qat");
        auto csv = detail::open_csv(detail::artifact(out_dir, stem + ".csv"), res);
        csv << "method,bits,fp_loss,loss,degradation\n";
        for (const auto& row : rows)
            csv << method_name(row.method) << ',' << row.bits << ',' << row.fp_loss << ',' << row.loss << ','
                << row.degradation() << '\n';
        detail::write_json(detail::artifact(out_dir, stem + ".json"), res);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Rank ablation

struct RankAblationOptions {
    ToyOptions toy;  // NOLA settings; rank is swept
    std::vector<std::size_t> ranks{1, 2, 4, 8};
};

struct RankRow {
    std::size_t rank = 0;
    std::uint64_t param_count = 0;
    std::uint64_t checkpoint_bytes = 0;
    double final_loss = 0.0;
};

inline std::vector<RankRow> rank_ablation(const RankAblationOptions& opts, const Dataset& data) {
    const ModelConfig cfg = opts.toy.model_config();
    const std::size_t max_rank = std::min({cfg.input_features, cfg.hidden, cfg.classes});
    for (auto r : opts.ranks)
        if (r == 0 || r > max_rank)
            throw usage_error("rank " + std::to_string(r) + " outside [1, " + std::to_string(max_rank) + "]");
    std::vector<RankRow> rows;
    for (auto r : opts.ranks) {
        ToyOptions toy = opts.toy;
        toy.method = Method::Nola;
        toy.rank = r;
        auto run = train_toy(toy, data);
        rows.push_back({r, model_param_count(run.model), serialize(export_checkpoint(run.model)).size(),
                        run.trace.final_loss()});
        if (rows.back().param_count != rows.front().param_count ||
            rows.back().checkpoint_bytes != rows.front().checkpoint_bytes)
            throw std::runtime_error("rank ablation: parameter count or checkpoint size changed with rank");
    }
    return rows;
}

inline ExperimentResult run_rank_ablation(const RankAblationOptions& opts, const Dataset& data,
                                          const DataSpec& source, const std::filesystem::path& out_dir = {}) {
    ExperimentResult res;
    res.name = "rank-ablation";
    opts.toy.describe(res.params);
    res.params.erase("rank");
    res.params["method"] = "nola";
    res.params["ranks"] = opts.ranks;
    res.params["data"] = source.describe();
    const auto rows = rank_ablation(opts, data);
    for (const auto& row : rows) {
        const std::string key = "@" + std::to_string(row.rank);
        res.metrics["final_train_loss" + key] = row.final_loss;
        res.metrics["param_count" + key] = static_cast<double>(row.param_count);
        res.metrics["checkpoint_bytes" + key] = static_cast<double>(row.checkpoint_bytes);
    }
    if (!out_dir.empty()) {
        auto csv = detail::open_csv(detail::artifact(out_dir, "rank_ablation.csv"), res);
        csv << "rank,param_count,checkpoint_bytes,final_loss\n";
        for (const auto& row : rows)
            csv << row.rank << ',' << row.param_count << ',' << row.checkpoint_bytes << ',' << row.final_loss << '\n';
        detail::write_json(detail::artifact(out_dir, "rank_ablation.json"), res);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Export and info

/// "float64", "float32" or "quantized:<bits>".
inline std::pair<CoeffEncoding, int> parse_encoding(const std::string& text) {
    if (text == "float64") return {CoeffEncoding::Float64, 0};
    if (text == "float32") return {CoeffEncoding::Float32, 0};
    if (text.rfind("quantized:", 0) == 0) {
        const std::string digits = text.substr(10);
        if (!digits.empty() && digits.size() <= 2 && std::all_of(digits.begin(), digits.end(), [](unsigned char ch) { return std::isdigit(ch) != 0; })) {
            const int bits = std::stoi(digits);
            if (bits >= 2 && bits <= 8) return {CoeffEncoding::Quantized, bits};
        }
    }
    throw usage_error("--encoding must be float64, float32 or quantized:<2..8>, got '" + text + "'");
}

inline ExperimentResult run_export(const ToyOptions& toy, const Dataset& data, const DataSpec& source,
                                   const std::string& encoding, const std::filesystem::path& out) {
    if (out.empty()) throw usage_error("export needs --out");
    if (toy.method == Method::Dense) throw usage_error("dense models have no checkpoint form");
    const auto [enc, bits] = parse_encoding(encoding);
    ExperimentResult res;
    res.name = "export";
    toy.describe(res.params);
    res.params["data"] = source.describe();
    res.params["encoding"] = encoding;
    auto run = train_toy(toy, data);
    const auto ckpt = export_checkpoint(run.model, enc, bits);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    write_checkpoint_file(out, ckpt);
    res.artifacts.push_back(out.string());
    res.metrics["final_train_loss"] = run.trace.final_loss();
    res.metrics["params"] = static_cast<double>(model_param_count(run.model));
    res.metrics["bytes"] = static_cast<double>(std::filesystem::file_size(out));
    return res;
}

/// Canonical dump plus a manifest line; the result carries the same numbers.
inline ExperimentResult run_info(const std::filesystem::path& file, std::ostream& text) {
    const auto bytes = read_file_bytes(file);
    const auto ckpt = deserialize(bytes);
    const std::vector<std::pair<std::string, TaskCheckpoint>> store{{file.filename().string(), ckpt}};
    const auto entry = report(store).entries.front();
    text << info_dump(ckpt);
    text << "manifest bytes " << entry.bytes << " params " << entry.trainable_params << " ratio "
         << entry.compression_ratio << '\n';
    ExperimentResult res;
    res.name = "info";
    res.params["file"] = file.string();
    res.metrics["bytes"] = static_cast<double>(entry.bytes);
    res.metrics["params"] = static_cast<double>(entry.trainable_params);
    res.metrics["compression_ratio"] = entry.compression_ratio;
    res.metrics["layers"] = static_cast<double>(ckpt.layers.size());
    return res;
}

}  // namespace nola
