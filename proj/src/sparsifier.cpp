// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ecolora/error.hpp"

namespace ecolora {

void SparsitySchedule::validate() const {
    auto fraction = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!fraction(k_max) || !fraction(k_min_A) || !fraction(k_min_B)) {
        throw InvalidConfig("sparsity fractions must lie in (0, 1]");
    }
    if (k_min_A > k_max || k_min_B > k_max) throw InvalidConfig("k_min must not exceed k_max");
    if (!(gamma_A >= 0.0) || !(gamma_B >= 0.0)) throw InvalidConfig("gamma must be non-negative");
}

double adaptive_k(const SparsitySchedule& schedule, MatrixKind kind, double prev_global_loss) {
    if (!schedule.initial_loss) throw ContractViolation("adaptive_k: initial loss not recorded");
    const double k_min = kind == MatrixKind::A ? schedule.k_min_A : schedule.k_min_B;
    const double gamma = kind == MatrixKind::A ? schedule.gamma_A : schedule.gamma_B;
    const double drop = *schedule.initial_loss - prev_global_loss;
    const double k = k_min + (schedule.k_max - k_min) * std::exp(-gamma * drop);
    return std::clamp(k, k_min, schedule.k_max);
}

std::size_t SparseUpdate::dense_length() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.dense_length;
    return n;
}

std::size_t SparseUpdate::nonzeros() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.nonzeros();
    return n;
}

std::size_t kept_count(std::size_t len, double k) {
    if (!(k > 0.0 && k <= 1.0)) throw InvalidArgument("sparsification fraction must lie in (0, 1]");
    // The epsilon absorbs representation error such as 0.7 * 10 = 7.000000000000001.
    const double want = std::ceil(k * static_cast<double>(len) - 1e-9);
    return std::min(len, static_cast<std::size_t>(std::max(want, 0.0)));
}

std::vector<std::uint32_t> top_k_indices(std::span<const float> x, std::size_t count) {
    count = std::min(count, x.size());
    std::vector<std::uint32_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0u);
    auto before = [&x](std::uint32_t a, std::uint32_t b) {
        const float fa = std::fabs(x[a]);
        const float fb = std::fabs(x[b]);
        return fa > fb || (fa == fb && a < b);
    };
    if (count < idx.size()) {
        std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(), before);
        idx.resize(count);
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace {

TensorUpdate sparsify_one(std::span<const float> delta, std::span<float> residual, double k,
                          std::uint16_t tensor_id, MatrixKind kind) {
    std::vector<float> s(delta.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = delta[i] + residual[i];

    TensorUpdate t;
    t.tensor_id = tensor_id;
    t.kind = kind;
    t.dense_length = static_cast<std::uint32_t>(s.size());
    for (auto i : top_k_indices(s, kept_count(s.size(), k))) {
        if (s[i] == 0.0f) continue;
        t.positions.push_back(i);
        t.values.push_back(s[i]);
        s[i] = 0.0f;
    }
    std::copy(s.begin(), s.end(), residual.begin());
    return t;
}

}  // namespace

SparsifyResult sparsify_with_residual(std::span<const float> delta, const Residual& residual, double k) {
    if (delta.size() != residual.values.size()) {
        throw ContractViolation("sparsify: delta has " + std::to_string(delta.size()) +
                                " entries, residual has " + std::to_string(residual.values.size()));
    }
    SparsifyResult out{{}, residual};
    out.update.tensors.push_back(sparsify_one(delta, out.residual.values, k, 0, MatrixKind::A));
    out.update.k_used_A = k;
    out.update.k_used_B = k;
    return out;
}

SparseUpdate sparsify_slices(std::span<const float> delta, std::span<float> residual,
                             std::span<const TensorSlice> slices, double k_A, double k_B) {
    if (delta.size() != residual.size()) throw ContractViolation("sparsify: delta/residual length mismatch");
    SparseUpdate u;
    u.k_used_A = k_A;
    u.k_used_B = k_B;
    for (const auto& sl : slices) {
        if (sl.offset + sl.length > delta.size()) throw ContractViolation("sparsify: slice out of range");
        const double k = sl.kind == MatrixKind::A ? k_A : k_B;
        u.tensors.push_back(sparsify_one(delta.subspan(sl.offset, sl.length),
                                         residual.subspan(sl.offset, sl.length), k, sl.tensor_id, sl.kind));
    }
    return u;
}

std::vector<float> densify(const SparseUpdate& update) {
    std::vector<float> out(update.dense_length(), 0.0f);
    std::size_t base = 0;
    for (const auto& t : update.tensors) {
        for (std::size_t i = 0; i < t.positions.size(); ++i) out[base + t.positions[i]] = t.values[i];
        base += t.dense_length;
    }
    return out;
}

void densify_into(const SparseUpdate& update, std::span<const TensorSlice> slices, std::span<float> out) {
    if (update.tensors.size() != slices.size()) throw ContractViolation("densify: tensor/slice count mismatch");
    for (std::size_t k = 0; k < slices.size(); ++k) {
        const auto& t = update.tensors[k];
        const auto& sl = slices[k];
        if (t.dense_length != sl.length || sl.offset + sl.length > out.size()) {
            throw ContractViolation("densify: tensor does not fit its slice");
        }
        for (std::size_t i = 0; i < t.positions.size(); ++i) out[sl.offset + t.positions[i]] += t.values[i];
    }
}

}  // namespace ecolora
