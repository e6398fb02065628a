// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "ecolora/error.hpp"

namespace ecolora {

double gini(std::span<const float> values) {
    if (values.empty()) throw InvalidArgument("gini: empty input");
    std::vector<double> mag(values.size());
    std::transform(values.begin(), values.end(), mag.begin(),
                   [](float v) { return std::fabs(static_cast<double>(v)); });
    std::sort(mag.begin(), mag.end());
    const auto n = static_cast<double>(mag.size());
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * mag[i];
        total += mag[i];
    }
    if (total == 0.0) return 0.0;
    return weighted / (n * total);
}

void ConvergenceConfig::validate() const {
    if (!(L > 0.0)) throw InvalidConfig("convergence: L must be positive");
    if (!(G >= 0.0)) throw InvalidConfig("convergence: G must be non-negative");
    if (!(delta > 0.0 && delta <= 1.0)) throw InvalidConfig("convergence: delta must lie in (0, 1]");
    if (!(beta > 0.0)) throw InvalidConfig("convergence: beta must be positive");
    if (!(T >= 1.0)) throw InvalidConfig("convergence: T must be at least 1");
    if (!(eta > 0.0)) throw InvalidConfig("convergence: eta must be positive");
}

ConvergenceConstants convergence_constants(const ConvergenceConfig& cfg) {
    cfg.validate();
    ConvergenceConstants c;
    const double eta_l = cfg.eta * cfg.L;
    c.mu = cfg.eta * (2.5 + cfg.delta * (2.0 * eta_l - 1.0) - 3.0 * eta_l);
    const double decay = std::exp(-cfg.beta);
    c.Delta = decay / (1.0 - decay) * eta_l * eta_l * cfg.num_segments * cfg.num_segments * cfg.G * cfg.G;
    c.eta_lo = 1.0 / cfg.L;
    c.eta_hi = (5.0 - 2.0 * cfg.delta) / ((6.0 - 4.0 * cfg.delta) * cfg.L);
    if (c.mu == 0.0) throw OutOfRange("convergence: mu is zero for this learning rate");
    c.bound = cfg.initial_gap / (c.mu * cfg.T) + cfg.eta * (2.0 * eta_l - 1.0) * c.Delta / c.mu;
    c.valid = cfg.eta > c.eta_lo && cfg.eta < c.eta_hi && c.mu > 0.0;
    return c;
}

double empirical_contraction_delta(std::span<const ContractionTrace> traces) {
    double best = 1.0;
    bool any = false;
    for (const auto& t : traces) {
        if (t.input.size() != t.output.size()) throw ContractViolation("contraction trace length mismatch");
        double err = 0.0;
        double norm = 0.0;
        for (std::size_t i = 0; i < t.input.size(); ++i) {
            const double x = t.input[i];
            const double d = static_cast<double>(t.output[i]) - x;
            err += d * d;
            norm += x * x;
        }
        if (norm == 0.0) continue;
        any = true;
        best = std::min(best, 1.0 - err / norm);
    }
    if (!any) throw InsufficientData("contraction: every trace had a zero-norm input");
    return best;
}

}  // namespace ecolora
