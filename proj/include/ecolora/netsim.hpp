// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic store-and-forward timing: a transfer of b bytes over a link of
// rate R with one-way latency d takes d + 8b/R seconds. Clients download,
// compute and upload independently; a round lasts as long as its slowest
// client.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecolora {

struct NetworkScenario {
    std::string name;
    double uplink_bps = 1e6;
    double downlink_bps = 5e6;
    double latency_s = 0.05;

    void validate() const;
};

/// Presets "0.2/1", "1/5", "2/10", "5/25" (uplink/downlink Mbps, 50 ms latency).
NetworkScenario scenario_preset(std::string_view name);

/// The four presets, slowest first.
std::vector<NetworkScenario> standard_scenarios();

double transfer_time(std::uint64_t bytes, double bandwidth_bps, double latency_s);

struct ClientTraffic {
    std::uint64_t upload_bytes = 0;
    std::uint64_t download_bytes = 0;
    double compute_s = 0.0;
};

struct ClientTime {
    double download_s = 0.0;
    double compute_s = 0.0;
    double upload_s = 0.0;
    double total_s = 0.0;
};

struct TimeBreakdown {
    std::vector<ClientTime> clients;
    double round_total_s = 0.0;    // max over clients of download + compute + upload
    double upload_s = 0.0;         // max over clients of upload
    double communication_s = 0.0;  // max over clients of download + upload
};

TimeBreakdown round_time(std::span<const ClientTraffic> traffic, const NetworkScenario& scenario);

}  // namespace ecolora
