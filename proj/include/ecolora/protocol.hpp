// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Round-robin segment sharing.
//
// The flat LoRA vector is cut into N_s contiguous segments. In round t the
// participant in slot i (position in the id-sorted sample) uploads segment
// (i + t) mod N_s; the server averages every segment over its uploaders,
// weighted by sample count. On receipt a client blends the new global model
// with its own last trained model, weight e^{-beta (t - tau)} on the local side.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ecolora/codec.hpp"
#include "ecolora/lora_model.hpp"
#include "ecolora/netsim.hpp"
#include "ecolora/sparsifier.hpp"

namespace ecolora {

struct SegmentPartition {
    std::size_t num_segments = 1;
    std::vector<std::size_t> boundaries;  // num_segments + 1 offsets

    std::size_t begin(std::size_t seg) const { return boundaries.at(seg); }
    std::size_t end(std::size_t seg) const { return boundaries.at(seg + 1); }
    std::size_t size(std::size_t seg) const { return end(seg) - begin(seg); }
    std::size_t total_len() const { return boundaries.back(); }
};

/// The first total_len mod N_s segments get one extra scalar.
SegmentPartition partition(std::size_t total_len, std::size_t num_segments);

/// (slot + round) mod N_s.
std::size_t assign_segment(std::size_t slot, std::size_t round, std::size_t num_segments);

/// Tensor slices covering one segment; offsets are relative to the segment start.
std::vector<TensorSlice> segment_slices(const ParamLayout& layout, const SegmentPartition& part,
                                        std::size_t seg);

/// One slice per tensor covering the whole vector.
std::vector<TensorSlice> full_slices(const ParamLayout& layout);

struct SegmentUpload {
    std::uint32_t client_id = 0;
    double samples = 0.0;  // n_i
    std::size_t segment_id = 0;
    std::vector<float> values;  // dense segment values
};

/// Sample-weighted average per segment, reassembled into a flat vector.
/// Contributions are summed in the order given. Throws ProtocolViolation when
/// a segment has no uploader and ContractViolation on a length mismatch.
std::vector<float> aggregate_segments(std::span<const SegmentUpload> uploads, const SegmentPartition& part);

struct ClientState {
    std::uint32_t id = 0;
    std::vector<float> local;  // last post-training parameters, empty until first participation
    Residual residual;
    std::optional<int> tau;  // last participation round
};

/// Weight on the local model: e^{-beta (t - tau)}, or 0 before the first
/// participation.
double mixing_weight(const std::optional<int>& tau, int round, double beta);

/// (1 - w) * global + w * local.
std::vector<float> mix_on_receive(const ClientState& client, std::span<const float> global, int round,
                                  double beta);

struct ProtocolConfig {
    bool segments = true;
    bool sparsify = true;
    bool encode = true;
    bool rice = false;
    SparsitySchedule schedule;
    double beta = 1.0;
    int local_epochs = 2;
    float lr = 0.05f;
    std::size_t batch_size = 0;
    std::optional<double> compute_seconds;  // replaces measured training time
    NetworkScenario scenario = {"1/5", 1e6, 5e6, 0.05};
    std::size_t threads = 1;
    std::uint64_t seed = 0;
};

struct ServerState {
    std::vector<float> global;          // aggregated model P^t
    std::vector<float> last_broadcast;  // global model the previous broadcast was computed from
    std::vector<float> client_view;     // what clients reconstruct from all broadcasts so far
    Residual download_residual;
    SegmentPartition partition;
    SparsitySchedule schedule;
    std::optional<double> prev_loss;  // L_{t-1}
};

/// Fresh server state around `init`. `num_segments` is clamped to 1 when
/// segment sharing is disabled.
ServerState make_server(std::span<const float> init, std::size_t num_segments, const ProtocolConfig& cfg,
                        double initial_loss);

struct ClientRoundRecord {
    std::uint32_t client_id = 0;
    std::size_t slot = 0;
    std::size_t segment = 0;
    std::size_t samples = 0;
    double train_loss = 0.0;
    double mixing_weight = 0.0;
    std::uint64_t upload_bytes = 0;
    std::uint64_t download_bytes = 0;
    std::size_t upload_dense = 0;     // scalars in the uploaded segment
    std::size_t upload_nonzeros = 0;  // values actually sent
    double compute_s = 0.0;
};

struct RoundReport {
    int round = 0;
    double global_loss = 0.0;  // Eq.-1 loss of the aggregated model over every client
    double train_loss = 0.0;   // sample-weighted final local loss of the participants
    double k_A = 1.0;
    double k_B = 1.0;
    std::vector<ClientRoundRecord> clients;
    std::uint64_t broadcast_bytes = 0;
    std::size_t download_dense = 0;
    std::size_t download_nonzeros = 0;
    TimeBreakdown time;
    double gini_A = 0.0;
    double gini_B = 0.0;
    std::uint64_t overhead_ops = 0;

    std::uint64_t upload_bytes() const noexcept;
    std::uint64_t download_bytes() const noexcept;
    std::size_t upload_dense() const noexcept;
    std::size_t upload_nonzeros() const noexcept;
};

/// Wire format implied by the feature toggles.
WireFormat wire_format(const ProtocolConfig& cfg) noexcept;

/// One federated round: broadcast, mix, train, sparsify, encode, upload,
/// aggregate. `sampled` must be sorted by client id; its positions are the
/// slots used for segment assignment. Every sampled client's tau becomes
/// `round`.
RoundReport run_round(ServerState& server, std::vector<ClientState>& clients,
                      std::span<const std::uint32_t> sampled, int round, const ProtocolConfig& cfg,
                      const ToyModel& model, std::span<const Dataset> datasets);

}  // namespace ecolora
