// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/netsim.hpp"

#include <algorithm>

#include "ecolora/error.hpp"

namespace ecolora {

void NetworkScenario::validate() const {
    if (!(uplink_bps > 0.0) || !(downlink_bps > 0.0) || !(latency_s > 0.0)) {
        throw InvalidConfig("network scenario '" + name + "': bandwidths and latency must be positive");
    }
}

NetworkScenario scenario_preset(std::string_view name) {
    for (auto& s : standard_scenarios()) {
        if (s.name == name) return s;
    }
    throw InvalidConfig("unknown network scenario '" + std::string(name) + "' (expected 0.2/1, 1/5, 2/10 or 5/25)");
}

std::vector<NetworkScenario> standard_scenarios() {
    return {
        {"0.2/1", 0.2e6, 1e6, 0.05},
        {"1/5", 1e6, 5e6, 0.05},
        {"2/10", 2e6, 10e6, 0.05},
        {"5/25", 5e6, 25e6, 0.05},
    };
}

double transfer_time(std::uint64_t bytes, double bandwidth_bps, double latency_s) {
    return latency_s + 8.0 * static_cast<double>(bytes) / bandwidth_bps;
}

TimeBreakdown round_time(std::span<const ClientTraffic> traffic, const NetworkScenario& scenario) {
    TimeBreakdown out;
    for (const auto& c : traffic) {
        ClientTime t;
        t.download_s = transfer_time(c.download_bytes, scenario.downlink_bps, scenario.latency_s);
        t.compute_s = c.compute_s;
        t.upload_s = transfer_time(c.upload_bytes, scenario.uplink_bps, scenario.latency_s);
        t.total_s = t.download_s + t.compute_s + t.upload_s;
        out.round_total_s = std::max(out.round_total_s, t.total_s);
        out.upload_s = std::max(out.upload_s, t.upload_s);
        out.communication_s = std::max(out.communication_s, t.download_s + t.upload_s);
        out.clients.push_back(t);
    }
    return out;
}

}  // namespace ecolora
