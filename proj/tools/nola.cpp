// nola <subcommand> [flags]: desk-scale NOLA, LoRA and PRANC experiments.
//
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <CLI11.hpp>

#include <exception>
#include <functional>
#include <iostream>
#include <string>

#include "nola/experiments.hpp"

namespace {

using namespace nola;

struct ToyFlags {
    ToyOptions toy;
    std::string method = "nola";
    std::string data = "synth";
    std::string optimizer = "sgd";
    std::size_t samples = 5000;
    bool synth_fallback = false;
    bool full = false;
};

void add_toy_flags(CLI::App* cmd, ToyFlags& f, bool with_method) {
    if (with_method) cmd->add_option("--method", f.method, "dense, nola, lora or pranc")->capture_default_str();
    cmd->add_option("--params-per-layer", f.toy.params_per_layer, "coefficients per layer (NOLA, PRANC)")
        ->capture_default_str();
    cmd->add_option("--rank", f.toy.rank, "rank for NOLA and LoRA")->capture_default_str();
    cmd->add_option("--c", f.toy.c, "scale constant; deltas are multiplied by c/r")->capture_default_str();
    cmd->add_option("--epochs", f.toy.epochs)->capture_default_str();
    cmd->add_option("--lr", f.toy.learning_rate)->capture_default_str();
    cmd->add_option("--batch-size", f.toy.batch_size)->capture_default_str();
    cmd->add_option("--optimizer", f.optimizer, "sgd or adam")->capture_default_str();
    cmd->add_option("--data", f.data, "synth, mnist (NOLA_DATA_DIR) or mnist:<dir>")->capture_default_str();
    cmd->add_option("--samples", f.samples, "synth sample count")->capture_default_str();
    cmd->add_flag("--synth-fallback", f.synth_fallback, "use synth data when MNIST files are missing");
    cmd->add_flag("--full", f.full, "full-size run: MNIST 60K, 200 epochs");
    cmd->add_option("--chunk-size", f.toy.stream.chunk_size, "bases generated per chunk")->capture_default_str();
    cmd->add_flag("--cache-bases", f.toy.cache_bases, "keep generated bases in memory");
}

/// Applies --full defaults and parses the enumerated flags.
DataSpec finish_toy_flags(CLI::App* cmd, ToyFlags& f, bool with_method) {
    if (with_method) {
        auto m = parse_method(f.method);
        if (!m) throw usage_error("--method must be dense, nola, lora or pranc");
        f.toy.method = *m;
    }
    if (f.optimizer == "sgd") f.toy.optimizer = OptimizerKind::Sgd;
    else if (f.optimizer == "adam") f.toy.optimizer = OptimizerKind::Adam;
    else throw usage_error("--optimizer must be sgd or adam");
    if (f.full) {
        if (cmd->count("--epochs") == 0) f.toy.epochs = 200;
        if (cmd->count("--data") == 0) f.data = "mnist";
        if (cmd->count("--samples") == 0) f.samples = 60000;
    }
    DataSpec spec = parse_data_spec(f.data);
    spec.synth_samples = f.samples;
    spec.synth_fallback = f.synth_fallback;
    f.toy.validate();
    return spec;
}

void print(const ExperimentResult& res) { std::cout << res.to_json().dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NOLA, LoRA and PRANC desk-scale experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_dir = "results";
    std::uint64_t seed = 0;
    app.add_option("--out-dir", out_dir, "directory for CSV and JSON artifacts")->capture_default_str();
    app.add_option("--seed", seed)->capture_default_str();
    std::function<void()> action;

    ToyFlags train_flags;
    auto* train_cmd = app.add_subcommand("train-toy", "train the 784-256-10 MLP");
    add_toy_flags(train_cmd, train_flags, true);
    train_cmd->callback([&] {
        action = [&] {
            auto source = finish_toy_flags(train_cmd, train_flags, true);
            train_flags.toy.seed = seed;
            auto data = load_dataset(source, seed);
            print(run_train_toy(train_flags.toy, data, source, out_dir));
        };
    });

    CoverageOptions cov;
    std::string cov_method = "nola";
    std::size_t cov_samples = 0;
    auto* cov_cmd = app.add_subcommand("rank-coverage", "numerical rank of random delta samples");
    cov_cmd->add_option("--method", cov_method, "nola or pranc")->capture_default_str();
    cov_cmd->add_option("--d", cov.d)->capture_default_str();
    cov_cmd->add_option("--total-params", cov.total_params, "comma-separated budgets")->delimiter(',')
        ->capture_default_str();
    cov_cmd->add_option("--rank", cov.rank)->capture_default_str();
    cov_cmd->add_option("--samples", cov_samples, "coefficient samples (default 4 d^2)");
    cov_cmd->callback([&] {
        action = [&] {
            auto m = parse_method(cov_method);
            if (!m) throw usage_error("--method must be nola or pranc");
            cov.method = *m;
            if (cov_cmd->count("--samples")) {
                if (cov_samples < 1) throw usage_error("--samples must be at least 1");
                cov.samples = cov_samples;
            }
            cov.seed = seed;
            print(run_rank_coverage(cov, out_dir));
        };
    });

    BenchOptions bench_opts;
    auto* bench_cmd = app.add_subcommand("bench", "time NOLA against PRANC on one layer");
    bench_cmd->add_option("--d", bench_opts.d)->capture_default_str();
    bench_cmd->add_option("--k", bench_opts.k, "coefficients per method")->capture_default_str();
    bench_cmd->add_option("--rank", bench_opts.rank)->capture_default_str();
    bench_cmd->add_option("--batches", bench_opts.batches)->capture_default_str();
    bench_cmd->add_option("--chunk-size", bench_opts.chunk_size)->capture_default_str();
    bench_cmd->add_option("--batch-rows", bench_opts.batch_rows, "input rows per batch")->capture_default_str();
    bench_cmd->callback([&] {
        action = [&] {
            bench_opts.seed = seed;
            print(run_bench(bench_opts, out_dir));
        };
    });

    ToyFlags quant_flags;
    QuantSweepOptions quant;
    std::string quant_mode = "ptq";
    auto* quant_cmd = app.add_subcommand("quant-sweep", "loss against coefficient bits, NOLA and LoRA");
    add_toy_flags(quant_cmd, quant_flags, false);
    quant_cmd->add_option("--bits", quant.bits, "comma-separated bit widths")->delimiter(',')->capture_default_str();
    quant_cmd->add_option("--mode", quant_mode, "ptq or qat")->capture_default_str();
    quant_cmd->add_option("--lora-rank", quant.lora_rank, "LoRA rank; NOLA gets the same budget")
        ->capture_default_str();
    quant_cmd->callback([&] {
        action = [&] {
            auto source = finish_toy_flags(quant_cmd, quant_flags, false);
            if (quant_mode == "ptq") quant.mode = QuantMode::Ptq;
            else if (quant_mode == "qat") quant.mode = QuantMode::Qat;
            else throw usage_error("--mode must be ptq or qat");
            quant_flags.toy.seed = seed;
            quant.toy = quant_flags.toy;
            auto data = load_dataset(source, seed);
            print(run_quant_sweep(quant, data, source, out_dir));
        };
    });

    ToyFlags ablation_flags;
    RankAblationOptions ablation;
    auto* ablation_cmd = app.add_subcommand("rank-ablation", "NOLA loss against rank at a fixed budget");
    add_toy_flags(ablation_cmd, ablation_flags, false);
    ablation_cmd->add_option("--ranks", ablation.ranks, "comma-separated ranks")->delimiter(',')
        ->capture_default_str();
    ablation_cmd->callback([&] {
        action = [&] {
            auto source = finish_toy_flags(ablation_cmd, ablation_flags, false);
            ablation_flags.toy.seed = seed;
            ablation.toy = ablation_flags.toy;
            auto data = load_dataset(source, seed);
            print(run_rank_ablation(ablation, data, source, out_dir));
        };
    });

    ToyFlags export_flags;
    std::string encoding = "float32";
    std::string export_out;
    auto* export_cmd = app.add_subcommand("export", "train a toy model and write its .nola checkpoint");
    add_toy_flags(export_cmd, export_flags, true);
    export_cmd->add_option("--encoding", encoding, "float64, float32 or quantized:<bits>")->capture_default_str();
    export_cmd->add_option("--out", export_out, "checkpoint path")->required();
    export_cmd->callback([&] {
        action = [&] {
            auto source = finish_toy_flags(export_cmd, export_flags, true);
            export_flags.toy.seed = seed;
            auto data = load_dataset(source, seed);
            print(run_export(export_flags.toy, data, source, encoding, export_out));
        };
    });

    std::string info_file;
    auto* info_cmd = app.add_subcommand("info", "print a checkpoint's layers and storage numbers");
    info_cmd->add_option("file", info_file, ".nola checkpoint")->required();
    info_cmd->callback([&] { action = [&] { print(run_info(info_file, std::cout)); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        action();
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const format_error& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
