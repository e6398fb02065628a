// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ecolora/error.hpp"
#include "ecolora/rng.hpp"

namespace ecolora {

std::vector<std::uint32_t> sample_clients(std::size_t num_clients, std::size_t count, int round,
                                          std::uint64_t seed) {
    if (count > num_clients) throw InvalidArgument("sample_clients: count exceeds the client pool");
    std::vector<std::uint32_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), 0u);
    Rng rng(derive_seed(seed, {seed_tags::kSampling, static_cast<std::uint64_t>(round)}));
    // Partial Fisher-Yates: the first `count` entries become the sample.
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, num_clients - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

RunSummary summarize(const std::vector<RoundReport>& reports, const RunConfig& cfg, double initial_loss,
                     std::size_t total_len) {
    RunSummary s;
    s.rounds = static_cast<int>(reports.size());
    s.total_len = total_len;
    s.initial_loss = initial_loss;
    s.final_loss = reports.empty() ? initial_loss : reports.back().global_loss;

    std::vector<NetworkScenario> scenarios{cfg.scenario};
    for (auto& sc : standard_scenarios()) {
        if (sc.name != cfg.scenario.name) scenarios.push_back(sc);
    }
    for (const auto& sc : scenarios) s.times.push_back({sc.name, 0.0, 0.0, 0.0});

    for (const auto& r : reports) {
        s.upload_dense += r.upload_dense();
        s.upload_params += r.upload_nonzeros();
        s.download_dense += r.download_dense * r.clients.size();
        s.download_params += r.download_nonzeros * r.clients.size();
        s.upload_bytes += r.upload_bytes();
        s.download_bytes += r.download_bytes();
        s.overhead_ops += r.overhead_ops;

        std::vector<ClientTraffic> traffic;
        for (const auto& c : r.clients) traffic.push_back({c.upload_bytes, c.download_bytes, c.compute_s});
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            const auto t = round_time(traffic, scenarios[i]);
            s.times[i].upload_s += t.upload_s;
            s.times[i].communication_s += t.communication_s;
            s.times[i].total_s += t.round_total_s;
        }
    }
    return s;
}

ExperimentResult run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const auto pcfg = cfg.protocol();

    auto built = build_toy_model(cfg.model.layers, cfg.model.rank, cfg.model.scaling, cfg.seed, cfg.data.task);
    const ToyModel& model = built.model;
    const auto full = make_synthetic_dataset(cfg.data);
    const auto datasets = dirichlet_partition(full, cfg.fl.num_clients, cfg.dirichlet_alpha, cfg.data.classes,
                                              cfg.seed);

    const double initial_loss = evaluate_global_loss(model, built.init, datasets);
    const auto init = built.init.flatten();
    auto server = make_server(init, cfg.eco.num_segments, pcfg, initial_loss);

    std::vector<ClientState> clients(cfg.fl.num_clients);
    for (std::size_t i = 0; i < clients.size(); ++i) {
        clients[i].id = static_cast<std::uint32_t>(i);
        clients[i].residual = Residual::zeros(init.size());
    }

    ExperimentResult out;
    for (int t = 0; t < cfg.fl.rounds; ++t) {
        const auto sampled = sample_clients(cfg.fl.num_clients, cfg.fl.clients_per_round, t, cfg.seed);
        out.reports.push_back(run_round(server, clients, sampled, t, pcfg, model, datasets));
    }
    out.summary = summarize(out.reports, cfg, initial_loss, init.size());
    return out;
}

RunConfig fedavg_config(const RunConfig& cfg) {
    RunConfig b = cfg;
    b.eco.segments = false;
    b.eco.sparsify = false;
    b.eco.encode = false;
    b.eco.num_segments = 1;
    b.eco.beta = std::numeric_limits<double>::infinity();
    return b;
}

std::vector<AblationRow> ablation_suite(const RunConfig& cfg, double budget_tol) {
    std::vector<AblationRow> rows;
    auto add = [&](std::string name, RunConfig c) {
        auto result = run_experiment(c);
        rows.push_back({std::move(name), std::move(c), std::move(result)});
        return rows.size() - 1;
    };

    const std::size_t full = add("Full", cfg);
    const double target = static_cast<double>(rows[full].result.summary.upload_params);

    RunConfig no_seg = cfg;
    no_seg.eco.segments = false;
    add("w/o R.R. Segment", no_seg);

    RunConfig no_sparse = cfg;
    no_sparse.eco.sparsify = false;
    add("w/o Sparsification", no_sparse);

    // Uploaded values grow monotonically with k, so bisect on k.
    auto fixed = [&](double k) {
        RunConfig c = cfg;
        c.eco.schedule.k_max = k;
        c.eco.schedule.k_min_A = k;
        c.eco.schedule.k_min_B = k;
        return c;
    };
    double lo = 0.01;
    double hi = 1.0;
    RunConfig best_cfg = fixed(0.5 * (lo + hi));
    ExperimentResult best = run_experiment(best_cfg);
    for (int iter = 0; iter < 30; ++iter) {
        const double got = static_cast<double>(best.summary.upload_params);
        if (std::abs(got - target) <= budget_tol * target) break;
        (got > target ? hi : lo) = best_cfg.eco.schedule.k_max;
        best_cfg = fixed(0.5 * (lo + hi));
        best = run_experiment(best_cfg);
    }
    rows.push_back({"w/ Fixed Sparsification", best_cfg, std::move(best)});

    RunConfig no_enc = cfg;
    no_enc.eco.encode = false;
    add("w/o Encoding", no_enc);
    return rows;
}

}  // namespace ecolora
