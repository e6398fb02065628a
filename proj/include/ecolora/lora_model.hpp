// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale stand-in for a frozen pre-trained model with LoRA adapters.
// Every layer computes z = (W + s * B * A) h with a frozen base W and the
// trainable low-rank factors A (r x n) and B (m x r), s = scaling / rank.
// Hidden layers use tanh, the last layer emits logits (classification) or
// raw predictions (regression).

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ecolora/tensor.hpp"

namespace ecolora {

enum class MatrixKind : std::uint8_t { A = 0, B = 1 };

enum class TaskKind { Classification, Regression };

const char* to_string(MatrixKind kind) noexcept;

/// Shape of one base weight: out x in (m x n).
struct LayerShape {
    std::size_t out = 0;
    std::size_t in = 0;
};

/// Placement of one trainable factor in the flat parameter vector.
struct TensorInfo {
    std::uint16_t id = 0;  // 2 * layer + kind
    std::size_t layer = 0;
    MatrixKind kind = MatrixKind::A;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
};

/// Flattening order: layer 0 A (row-major), layer 0 B, layer 1 A, ...
class ParamLayout {
public:
    ParamLayout() = default;
    ParamLayout(std::span<const LayerShape> shapes, std::size_t rank);

    const std::vector<TensorInfo>& tensors() const noexcept { return tensors_; }
    const std::vector<LayerShape>& shapes() const noexcept { return shapes_; }
    std::size_t rank() const noexcept { return rank_; }
    std::size_t total_len() const noexcept { return total_len_; }

private:
    std::vector<LayerShape> shapes_;
    std::vector<TensorInfo> tensors_;
    std::size_t rank_ = 0;
    std::size_t total_len_ = 0;
};

struct LoraFactors {
    Matrix a;  // r x n
    Matrix b;  // m x r

    friend bool operator==(const LoraFactors&, const LoraFactors&) = default;
};

struct LoraParams {
    std::vector<LoraFactors> layers;

    std::size_t total_len() const noexcept;
    std::vector<float> flatten() const;
    static LoraParams unflatten(const ParamLayout& layout, std::span<const float> flat);

    friend bool operator==(const LoraParams&, const LoraParams&) = default;
};

/// Samples held by one client (or the full pool). `origin` maps each row back
/// to its index in the full synthetic pool.
struct Dataset {
    TaskKind task = TaskKind::Classification;
    Matrix features;          // n_i x dim
    std::vector<int> labels;  // cluster id per row, present for both tasks
    Matrix targets;           // n_i x outputs, regression only
    std::vector<std::size_t> origin;

    std::size_t size() const noexcept { return features.rows(); }
};

using ClientDataset = Dataset;

class ToyModel {
public:
    ToyModel(std::vector<Matrix> bases, std::size_t rank, float scaling, TaskKind task);

    const ParamLayout& layout() const noexcept { return layout_; }
    const Matrix& base(std::size_t layer) const { return bases_.at(layer); }
    std::size_t num_layers() const noexcept { return bases_.size(); }
    std::size_t rank() const noexcept { return rank_; }
    float scaling() const noexcept { return scaling_; }
    /// Multiplier applied to B * A, i.e. scaling / rank.
    float factor_scale() const noexcept { return scaling_ / static_cast<float>(rank_); }
    TaskKind task() const noexcept { return task_; }

    /// W + (scaling / rank) * B * A for one layer.
    Matrix effective_weight(const LoraParams& params, std::size_t layer) const;

    /// Mean loss over every row of `data`.
    double loss(const LoraParams& params, const Dataset& data) const;

    /// Loss of a single row.
    double sample_loss(const LoraParams& params, const Dataset& data, std::size_t row) const;

    /// Gradient of the mean loss over `rows` with respect to every A and B.
    /// The mean batch loss is written to `batch_loss` when non-null.
    LoraParams gradient(const LoraParams& params, const Dataset& data,
                        std::span<const std::size_t> rows, double* batch_loss = nullptr) const;

private:
    void check_chain(const Dataset& data) const;

    std::vector<Matrix> bases_;
    ParamLayout layout_;
    std::size_t rank_;
    float scaling_;
    TaskKind task_;
};

struct BuiltModel {
    ToyModel model;
    LoraParams init;
};

/// A ~ U[-1/sqrt(n), 1/sqrt(n)], B = 0, W ~ N(0, 1/n). Throws InvalidConfig
/// when the rank exceeds min(m, n) for any layer.
BuiltModel build_toy_model(std::span<const LayerShape> dims, std::size_t rank, float scaling,
                           std::uint64_t seed, TaskKind task = TaskKind::Classification);

struct TrainOptions {
    int epochs = 1;
    float lr = 0.05f;
    std::size_t batch_size = 0;  // 0 = full batch
    std::uint64_t shuffle_seed = 0;
    int round = 0;
    std::uint32_t client_id = 0;
};

struct TrainResult {
    LoraParams params;
    std::vector<float> delta;  // flatten(trained) - flatten(start)
    double loss = 0.0;         // mean local loss after the last epoch
};

/// Plain SGD on the LoRA factors. Throws DivergedTraining on a non-finite loss.
TrainResult local_train(const ToyModel& model, const Dataset& data, const LoraParams& start,
                        const TrainOptions& options);

/// n_i-weighted mean of per-client mean losses.
double evaluate_global_loss(const ToyModel& model, const LoraParams& params,
                            std::span<const Dataset> clients);

struct DataSpec {
    TaskKind task = TaskKind::Classification;
    std::size_t classes = 10;
    std::size_t dim = 32;
    std::size_t samples = 5000;
    float noise = 2.0f;
    float separation = 1.0f;  // stddev of cluster centers
    std::size_t outputs = 10;  // regression target width
    std::uint64_t seed = 0;
};

/// Gaussian mixture with one cluster per class, samples split evenly across
/// classes (remainder to the lowest classes).
Dataset make_synthetic_dataset(const DataSpec& spec);

/// Label-skewed split: each class is divided among clients with proportions
/// drawn from Dirichlet(alpha). Every client receives at least one row.
std::vector<Dataset> dirichlet_partition(const Dataset& full, std::size_t num_clients,
                                         double alpha, std::size_t num_classes,
                                         std::uint64_t seed);

/// Rows `rows` of `full`, in the given order.
Dataset subset(const Dataset& full, std::span<const std::size_t> rows);

}  // namespace ecolora
