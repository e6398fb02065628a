// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: builds the toy model and the partitioned data from a
// RunConfig, then runs the federated rounds sequentially.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecolora/config.hpp"
#include "ecolora/protocol.hpp"

namespace ecolora {

/// Uniform sample of `count` distinct ids from [0, num_clients), sorted.
/// Each round draws from its own stream derived from the master seed.
std::vector<std::uint32_t> sample_clients(std::size_t num_clients, std::size_t count, int round,
                                          std::uint64_t seed);

struct ScenarioTotals {
    std::string scenario;
    double upload_s = 0.0;
    double communication_s = 0.0;
    double total_s = 0.0;
};

struct RunSummary {
    int rounds = 0;
    std::size_t total_len = 0;  // trainable scalars in the model
    double initial_loss = 0.0;
    double final_loss = 0.0;
    // Scalar counts, summed over every participant of every round. "dense"
    // counts the scalars an update covers, "params" the values actually sent.
    std::uint64_t upload_dense = 0;
    std::uint64_t upload_params = 0;
    std::uint64_t download_dense = 0;
    std::uint64_t download_params = 0;
    std::uint64_t upload_bytes = 0;
    std::uint64_t download_bytes = 0;
    std::uint64_t overhead_ops = 0;
    std::vector<ScenarioTotals> times;  // the configured scenario first, then the presets

    std::uint64_t total_params() const noexcept { return upload_params + download_params; }
    std::uint64_t total_dense() const noexcept { return upload_dense + download_dense; }
};

struct ExperimentResult {
    std::vector<RoundReport> reports;
    RunSummary summary;
};

/// Runs cfg.fl.rounds rounds. Deterministic for a fixed config, independent
/// of cfg.threads except for measured compute time.
ExperimentResult run_experiment(const RunConfig& cfg);

/// Recomputes the summary (including the per-scenario times) from reports.
RunSummary summarize(const std::vector<RoundReport>& reports, const RunConfig& cfg, double initial_loss,
                     std::size_t total_len);

/// The uncompressed baseline: every toggle off, one segment, no mixing.
RunConfig fedavg_config(const RunConfig& cfg);

struct AblationRow {
    std::string variant;
    RunConfig config;
    ExperimentResult result;
};

/// Full, "w/o R.R. Segment", "w/o Sparsification", "w/ Fixed Sparsification"
/// and "w/o Encoding". The fixed-k variant uses one k for both matrices,
/// searched so its total uploaded values match Full's within `budget_tol`.
std::vector<AblationRow> ablation_suite(const RunConfig& cfg, double budget_tol = 0.02);

}  // namespace ecolora
