// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. Stored as JSON; every key is optional and falls back to
// the defaults below. See README.md for the schema.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ecolora/lora_model.hpp"
#include "ecolora/netsim.hpp"
#include "ecolora/protocol.hpp"
#include "ecolora/sparsifier.hpp"

#include <json.hpp>

namespace ecolora {

struct ModelConfig {
    std::vector<LayerShape> layers = {{32, 32}, {10, 32}};
    std::size_t rank = 4;
    float scaling = 8.0f;
};

struct FederationConfig {
    std::size_t num_clients = 100;
    std::size_t clients_per_round = 10;
    int rounds = 40;
    int local_epochs = 2;
    float lr = 0.1f;
    std::size_t batch_size = 0;  // 0 = full local batch
};

struct EcoLoraConfig {
    std::size_t num_segments = 5;
    SparsitySchedule schedule;  // k_max 0.95, k_min_A 0.6, k_min_B 0.5, gamma_A 1, gamma_B 2
    double beta = 1.0;
    bool segments = true;
    bool sparsify = true;
    bool encode = true;
    bool rice = false;
};

struct RunConfig {
    ModelConfig model;
    DataSpec data;
    double dirichlet_alpha = 0.5;
    FederationConfig fl;
    EcoLoraConfig eco;
    NetworkScenario scenario = {"1/5", 1e6, 5e6, 0.05};
    std::optional<double> compute_seconds = 0.0;  // per-client training time; empty means measured
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    /// Throws InvalidConfig naming the offending field.
    void validate() const;

    ProtocolConfig protocol() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace ecolora
