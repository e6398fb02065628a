// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss-adaptive, matrix-aware top-k sparsification with error feedback.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ecolora/lora_model.hpp"

namespace ecolora {

/// k^t = k_min + (k_max - k_min) * exp(-gamma * (L0 - L_{t-1})), per matrix kind.
struct SparsitySchedule {
    double k_max = 0.95;
    double k_min_A = 0.6;
    double k_min_B = 0.5;
    double gamma_A = 1.0;
    double gamma_B = 2.0;
    std::optional<double> initial_loss;  // L0, recorded once at round 0

    void validate() const;
};

/// Fraction to keep for `kind` given the previous round's global loss.
/// Clamped to [k_min, k_max]; a loss above L0 therefore yields k_max.
double adaptive_k(const SparsitySchedule& schedule, MatrixKind kind, double prev_global_loss);

/// Untransmitted remainder of past updates; same length and order as the
/// owner's flattened parameters.
struct Residual {
    std::vector<float> values;

    static Residual zeros(std::size_t n) { return {std::vector<float>(n, 0.0f)}; }
};

struct TensorUpdate {
    std::uint16_t tensor_id = 0;
    MatrixKind kind = MatrixKind::A;
    std::uint32_t dense_length = 0;
    std::vector<std::uint32_t> positions;  // strictly increasing, < dense_length
    std::vector<float> values;

    std::size_t nonzeros() const noexcept { return positions.size(); }

    friend bool operator==(const TensorUpdate&, const TensorUpdate&) = default;
};

struct SparseUpdate {
    std::vector<TensorUpdate> tensors;
    double k_used_A = 1.0;
    double k_used_B = 1.0;

    std::size_t dense_length() const noexcept;
    std::size_t nonzeros() const noexcept;
    double k_for(MatrixKind kind) const noexcept { return kind == MatrixKind::A ? k_used_A : k_used_B; }
};

/// A run of `length` scalars at `offset` of some flat buffer that belongs to
/// one factor matrix. Segments of the flat vector cut across tensors, so an
/// upload is described by a list of slices.
struct TensorSlice {
    std::uint16_t tensor_id = 0;
    MatrixKind kind = MatrixKind::A;
    std::size_t offset = 0;
    std::size_t length = 0;
};

/// ceil(k * len) for k in (0, 1], never more than len.
std::size_t kept_count(std::size_t len, double k);

/// Indices of the `count` largest |x| (lower index wins ties), ascending.
std::vector<std::uint32_t> top_k_indices(std::span<const float> x, std::size_t count);

struct SparsifyResult {
    SparseUpdate update;
    Residual residual;
};

/// Single-tensor form: s = delta + residual, keep the ceil(k * len) largest
/// entries of s, new residual = s - densify(update). Exact zeros among the
/// selected entries are not transmitted.
SparsifyResult sparsify_with_residual(std::span<const float> delta, const Residual& residual, double k);

/// Multi-tensor form used by the protocol. Each slice is sparsified with the
/// k of its matrix kind; `residual` is updated in place and is indexed like
/// `delta`.
SparseUpdate sparsify_slices(std::span<const float> delta, std::span<float> residual,
                             std::span<const TensorSlice> slices, double k_A, double k_B);

/// Concatenation of every tensor's dense form.
std::vector<float> densify(const SparseUpdate& update);

/// Adds each tensor of `update` into `out` at the offset of the slice with the
/// same position in `slices`.
void densify_into(const SparseUpdate& update, std::span<const TensorSlice> slices, std::span<float> out);

}  // namespace ecolora
