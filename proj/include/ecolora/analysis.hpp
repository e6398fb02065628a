// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace ecolora {

/// Gini coefficient of |v|: sum_i (2i - n - 1) |v|_(i) / (n * sum |v|) over the
/// ascending order statistics. 0 for an all-zero vector.
double gini(std::span<const float> values);

struct ConvergenceConfig {
    double eta = 0.3;     // learning rate
    double L = 4.0;       // smoothness constant
    double delta = 0.9;   // compressor contraction constant, (0, 1]
    double beta = 1.0;    // staleness decay
    double num_segments = 5.0;
    double G = 1.0;       // gradient-norm bound
    double T = 100.0;     // rounds
    double initial_gap = 10.0;  // F(P_0) - F*

    void validate() const;
};

struct ConvergenceConstants {
    double mu = 0.0;
    double Delta = 0.0;
    double eta_lo = 0.0;  // 1 / L
    double eta_hi = 0.0;  // (5 - 2 delta) / ((6 - 4 delta) L)
    double bound = 0.0;   // bound on the average squared gradient norm over T rounds
    bool valid = false;   // eta strictly inside (eta_lo, eta_hi) and mu > 0
};

/// mu = eta (5/2 + delta (2 eta L - 1) - 3 eta L)
/// Delta = e^-beta / (1 - e^-beta) L^2 eta^2 N_s^2 G^2
/// bound = gap / (mu T) + eta (2 eta L - 1) Delta / mu
/// Throws OutOfRange when mu == 0.
ConvergenceConstants convergence_constants(const ConvergenceConfig& cfg);

struct ContractionTrace {
    std::vector<float> input;
    std::vector<float> output;
};

/// min over traces of 1 - |C(x) - x|^2 / |x|^2, skipping zero inputs.
/// Throws InsufficientData when every trace is skipped.
double empirical_contraction_delta(std::span<const ContractionTrace> traces);

}  // namespace ecolora
