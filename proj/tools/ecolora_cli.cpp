// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

#include <CLI11.hpp>

#include "ecolora/analysis.hpp"
#include "ecolora/codec.hpp"
#include "ecolora/config.hpp"
#include "ecolora/error.hpp"
#include "ecolora/experiment.hpp"
#include "ecolora/metrics.hpp"

using namespace ecolora;

namespace {

struct CommonFlags {
    std::string config;
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool no_segments = false;
    bool no_sparsify = false;
    bool no_encode = false;
    std::optional<int> rounds;
    std::optional<std::size_t> threads;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--scenario", f.scenario, "network preset: 0.2/1, 1/5, 2/10, 5/25");
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--rounds", f.rounds, "number of global rounds");
    app->add_option("--threads", f.threads, "client training workers");
    app->add_flag("--no-segments", f.no_segments, "every client uploads the whole vector");
    app->add_flag("--no-sparsify", f.no_sparsify, "send dense updates");
    app->add_flag("--no-encode", f.no_encode, "fixed-width positions instead of Golomb codes");
}

RunConfig resolve(const CommonFlags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (!f.scenario.empty()) c.scenario = scenario_preset(f.scenario);
    if (f.seed) {
        c.seed = *f.seed;
        c.data.seed = *f.seed;
    }
    if (!f.out.empty()) c.out_dir = f.out;
    if (f.rounds) c.fl.rounds = *f.rounds;
    if (f.threads) c.threads = *f.threads;
    if (f.no_segments) c.eco.segments = false;
    if (f.no_sparsify) c.eco.sparsify = false;
    if (f.no_encode) c.eco.encode = false;
    c.validate();
    return c;
}

void print_summary(const RunSummary& s) {
    std::printf("rounds           %d\n", s.rounds);
    std::printf("trainable        %zu\n", s.total_len);
    std::printf("loss             %.6f -> %.6f\n", s.initial_loss, s.final_loss);
    std::printf("upload   dense   %llu  sent %llu  bytes %llu\n", static_cast<unsigned long long>(s.upload_dense),
                static_cast<unsigned long long>(s.upload_params), static_cast<unsigned long long>(s.upload_bytes));
    std::printf("download dense   %llu  sent %llu  bytes %llu\n",
                static_cast<unsigned long long>(s.download_dense), static_cast<unsigned long long>(s.download_params),
                static_cast<unsigned long long>(s.download_bytes));
    for (const auto& t : s.times) {
        std::printf("time %-8s upload %.3fs  comm %.3fs  total %.3fs\n", t.scenario.c_str(), t.upload_s,
                    t.communication_s, t.total_s);
    }
}

int cmd_run(const CommonFlags& f) {
    const auto cfg = resolve(f);
    const auto result = run_experiment(cfg);
    write_metrics(result, cfg.out_dir);
    print_summary(result.summary);
    std::printf("wrote %s/rounds.csv and %s/summary.json\n", cfg.out_dir.c_str(), cfg.out_dir.c_str());
    return 0;
}

int cmd_ablate(const CommonFlags& f) {
    const auto cfg = resolve(f);
    const auto rows = ablation_suite(cfg);
    nlohmann::json table = nlohmann::json::array();
    std::printf("%-26s %12s %14s %14s %12s %12s\n", "variant", "final_loss", "upload_params", "upload_bytes",
                "upload_s", "total_s");
    for (const auto& r : rows) {
        const auto& s = r.result.summary;
        const auto& t = s.times.front();
        std::printf("%-26s %12.6f %14llu %14llu %12.3f %12.3f\n", r.variant.c_str(), s.final_loss,
                    static_cast<unsigned long long>(s.upload_params), static_cast<unsigned long long>(s.upload_bytes),
                    t.upload_s, t.total_s);
        auto row = summary_to_json(s);
        row["variant"] = r.variant;
        table.push_back(row);
    }
    std::filesystem::create_directories(cfg.out_dir);
    write_file_atomic(std::filesystem::path(cfg.out_dir) / "ablation.json", table.dump(2) + "\n");
    return 0;
}

int cmd_codec_bench(double k, std::size_t samples, std::uint64_t seed, bool rice) {
    const auto cost = measure_position_cost(k, samples, seed, rice);
    std::printf("k                 %g\n", k);
    std::printf("divisor M         %u%s\n", cost.param.m, rice ? " (rice)" : "");
    std::printf("bits/position     %.4f\n", cost.bits_per_position);
    std::printf("vs 16-bit         %.3fx\n", 16.0 / cost.bits_per_position);
    return 0;
}

int cmd_constants(const ConvergenceConfig& cc) {
    const auto c = convergence_constants(cc);
    std::printf("mu                %.10g\n", c.mu);
    std::printf("Delta             %.10g\n", c.Delta);
    std::printf("eta interval      (%.10g, %.10g)\n", c.eta_lo, c.eta_hi);
    std::printf("bound             %.10g\n", c.bound);
    std::printf("eta admissible    %s\n", c.valid ? "yes" : "no");
    return 0;
}

int cmd_dump_wire(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::cout << describe_message(bytes);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated LoRA fine-tuning simulator with compressed communication"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "run one experiment and write metrics");
    add_common(run, run_flags);

    CommonFlags ablate_flags;
    auto* ablate = app.add_subcommand("ablate", "run Full plus the four ablation variants");
    add_common(ablate, ablate_flags);

    double bench_k = 0.1;
    std::size_t bench_samples = 1000000;
    std::uint64_t bench_seed = 0;
    bool bench_rice = false;
    auto* bench = app.add_subcommand("codec-bench", "mean Golomb code length for geometric gaps");
    bench->add_option("-k,--keep", bench_k, "kept fraction in (0, 1)")->check(CLI::Range(0.0, 1.0));
    bench->add_option("-n,--samples", bench_samples, "number of gaps");
    bench->add_option("--seed", bench_seed, "seed");
    bench->add_flag("--rice", bench_rice, "round the divisor up to a power of two");

    ConvergenceConfig cc;
    auto* constants = app.add_subcommand("constants", "convergence constants and bound");
    constants->add_option("--eta", cc.eta, "learning rate")->capture_default_str();
    constants->add_option("--L", cc.L, "smoothness constant")->capture_default_str();
    constants->add_option("--delta", cc.delta, "compressor contraction in (0,1]")->capture_default_str();
    constants->add_option("--beta", cc.beta, "staleness decay")->capture_default_str();
    constants->add_option("--segments", cc.num_segments, "segment count")->capture_default_str();
    constants->add_option("--G", cc.G, "gradient norm bound")->capture_default_str();
    constants->add_option("--T", cc.T, "rounds")->capture_default_str();
    constants->add_option("--gap", cc.initial_gap, "initial optimality gap")->capture_default_str();

    std::string wire_path;
    auto* dump = app.add_subcommand("dump-wire", "annotated hex view of an encoded message");
    dump->add_option("file", wire_path, "message file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(run_flags);
        if (*ablate) return cmd_ablate(ablate_flags);
        if (*bench) return cmd_codec_bench(bench_k, bench_samples, bench_seed, bench_rice);
        if (*constants) return cmd_constants(cc);
        if (*dump) return cmd_dump_wire(wire_path);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
