// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "ecolora/analysis.hpp"
#include "ecolora/error.hpp"
#include "ecolora/rng.hpp"

namespace ecolora {

SegmentPartition partition(std::size_t total_len, std::size_t num_segments) {
    if (num_segments == 0) throw InvalidConfig("partition: need at least one segment");
    if (num_segments > total_len) {
        throw InvalidConfig("partition: " + std::to_string(num_segments) + " segments exceed " +
                            std::to_string(total_len) + " parameters");
    }
    SegmentPartition p;
    p.num_segments = num_segments;
    const std::size_t base = total_len / num_segments;
    const std::size_t extra = total_len % num_segments;
    p.boundaries.push_back(0);
    for (std::size_t s = 0; s < num_segments; ++s) {
        p.boundaries.push_back(p.boundaries.back() + base + (s < extra ? 1 : 0));
    }
    return p;
}

std::size_t assign_segment(std::size_t slot, std::size_t round, std::size_t num_segments) {
    return (slot + round) % num_segments;
}

std::vector<TensorSlice> segment_slices(const ParamLayout& layout, const SegmentPartition& part,
                                        std::size_t seg) {
    const std::size_t lo = part.begin(seg);
    const std::size_t hi = part.end(seg);
    std::vector<TensorSlice> out;
    for (const auto& t : layout.tensors()) {
        const std::size_t a = std::max(lo, t.offset);
        const std::size_t b = std::min(hi, t.offset + t.size());
        if (a < b) out.push_back({t.id, t.kind, a - lo, b - a});
    }
    return out;
}

std::vector<TensorSlice> full_slices(const ParamLayout& layout) {
    std::vector<TensorSlice> out;
    for (const auto& t : layout.tensors()) out.push_back({t.id, t.kind, t.offset, t.size()});
    return out;
}

std::vector<float> aggregate_segments(std::span<const SegmentUpload> uploads, const SegmentPartition& part) {
    std::vector<double> sums(part.total_len(), 0.0);
    std::vector<double> weights(part.num_segments, 0.0);
    for (const auto& u : uploads) {
        if (u.segment_id >= part.num_segments) {
            throw ProtocolViolation("upload from client " + std::to_string(u.client_id) + " names segment " +
                                    std::to_string(u.segment_id) + " of " + std::to_string(part.num_segments));
        }
        if (u.values.size() != part.size(u.segment_id)) {
            throw ContractViolation("segment " + std::to_string(u.segment_id) + " upload has " +
                                    std::to_string(u.values.size()) + " values, expected " +
                                    std::to_string(part.size(u.segment_id)));
        }
        const std::size_t base = part.begin(u.segment_id);
        for (std::size_t i = 0; i < u.values.size(); ++i) sums[base + i] += u.samples * u.values[i];
        weights[u.segment_id] += u.samples;
    }
    std::vector<float> out(part.total_len());
    for (std::size_t s = 0; s < part.num_segments; ++s) {
        if (!(weights[s] > 0.0)) throw ProtocolViolation("segment " + std::to_string(s) + " received no upload");
        for (std::size_t i = part.begin(s); i < part.end(s); ++i) {
            out[i] = static_cast<float>(sums[i] / weights[s]);
        }
    }
    return out;
}

double mixing_weight(const std::optional<int>& tau, int round, double beta) {
    if (!tau) return 0.0;
    if (*tau >= round) throw ContractViolation("mixing: tau must precede the current round");
    return std::exp(-beta * static_cast<double>(round - *tau));
}

std::vector<float> mix_on_receive(const ClientState& client, std::span<const float> global, int round,
                                  double beta) {
    const double w = mixing_weight(client.tau, round, beta);
    std::vector<float> out(global.begin(), global.end());
    if (w == 0.0) return out;
    if (client.local.size() != global.size()) throw ContractViolation("mixing: local model length mismatch");
    const auto wl = static_cast<float>(w);
    const auto wg = static_cast<float>(1.0 - w);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = wg * global[i] + wl * client.local[i];
    return out;
}

ServerState make_server(std::span<const float> init, std::size_t num_segments, const ProtocolConfig& cfg,
                        double initial_loss) {
    ServerState s;
    s.global.assign(init.begin(), init.end());
    s.last_broadcast = s.global;
    s.client_view = s.global;
    s.download_residual = Residual::zeros(init.size());
    s.partition = partition(init.size(), cfg.segments ? num_segments : 1);
    s.schedule = cfg.schedule;
    s.schedule.validate();
    s.schedule.initial_loss = initial_loss;
    return s;
}

std::uint64_t RoundReport::upload_bytes() const noexcept {
    std::uint64_t n = 0;
    for (const auto& c : clients) n += c.upload_bytes;
    return n;
}

std::uint64_t RoundReport::download_bytes() const noexcept {
    std::uint64_t n = 0;
    for (const auto& c : clients) n += c.download_bytes;
    return n;
}

std::size_t RoundReport::upload_dense() const noexcept {
    std::size_t n = 0;
    for (const auto& c : clients) n += c.upload_dense;
    return n;
}

std::size_t RoundReport::upload_nonzeros() const noexcept {
    std::size_t n = 0;
    for (const auto& c : clients) n += c.upload_nonzeros;
    return n;
}

WireFormat wire_format(const ProtocolConfig& cfg) noexcept {
    if (cfg.encode) return WireFormat::Golomb;
    return cfg.sparsify ? WireFormat::FixedPositions : WireFormat::DenseF32;
}

namespace {

constexpr std::uint32_t kBroadcastClient = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint16_t kBroadcastSegment = std::numeric_limits<std::uint16_t>::max();

// Folds the value rounding of the wire into the residual so that transmitted
// plus residual still equals the input of the sparsifier.
void absorb_wire_error(const SparseUpdate& sent, const SparseUpdate& received, std::span<const TensorSlice> slices,
                       std::span<float> residual) {
    for (std::size_t k = 0; k < slices.size(); ++k) {
        const auto& a = sent.tensors[k];
        const auto& b = received.tensors[k];
        for (std::size_t i = 0; i < a.positions.size(); ++i) {
            residual[slices[k].offset + a.positions[i]] += a.values[i] - b.values[i];
        }
    }
}

std::uint64_t topk_cost(std::size_t n) {
    return n <= 1 ? n : static_cast<std::uint64_t>(static_cast<double>(n) * std::log2(static_cast<double>(n)));
}

struct ClientJob {
    std::vector<std::uint8_t> message;
    SparseUpdate sent;
    std::vector<float> trained;
    ClientRoundRecord record;
    std::uint64_t overhead_ops = 0;
};

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(threads, count); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace

RoundReport run_round(ServerState& server, std::vector<ClientState>& clients,
                      std::span<const std::uint32_t> sampled, int round, const ProtocolConfig& cfg,
                      const ToyModel& model, std::span<const Dataset> datasets) {
    const auto& part = server.partition;
    if (sampled.size() < part.num_segments) {
        throw ProtocolViolation("round " + std::to_string(round) + ": " + std::to_string(sampled.size()) +
                                " participants cannot cover " + std::to_string(part.num_segments) + " segments");
    }
    if (!std::is_sorted(sampled.begin(), sampled.end())) throw ContractViolation("run_round: sample must be sorted by id");

    const ParamLayout& layout = model.layout();
    const std::size_t total = layout.total_len();
    const EncodeOptions wire{wire_format(cfg), cfg.rice};

    RoundReport report;
    report.round = round;
    if (cfg.sparsify) {
        const double prev = server.prev_loss.value_or(*server.schedule.initial_loss);
        report.k_A = adaptive_k(server.schedule, MatrixKind::A, prev);
        report.k_B = adaptive_k(server.schedule, MatrixKind::B, prev);
    }

    // Broadcast: compressed change of the global model since the last broadcast.
    const auto all = full_slices(layout);
    std::vector<float> change(total);
    for (std::size_t i = 0; i < total; ++i) change[i] = server.global[i] - server.last_broadcast[i];
    const SparseUpdate down =
        sparsify_slices(change, server.download_residual.values, all, report.k_A, report.k_B);
    const auto down_msg = encode_message(down, static_cast<std::uint32_t>(round), kBroadcastClient,
                                         kBroadcastSegment, wire);
    const auto down_rx = decode_message(down_msg);
    absorb_wire_error(down, down_rx.update, all, server.download_residual.values);
    densify_into(down_rx.update, all, server.client_view);
    server.last_broadcast = server.global;
    report.broadcast_bytes = down_msg.size();
    report.download_dense = total;
    report.download_nonzeros = down.nonzeros();
    report.overhead_ops += topk_cost(total) + total + down.nonzeros();

    // Clients.
    std::vector<ClientJob> jobs(sampled.size());
    const auto& view = server.client_view;
    parallel_for(sampled.size(), cfg.threads, [&](std::size_t slot) {
        const std::uint32_t id = sampled[slot];
        ClientState& client = clients.at(id);
        const Dataset& data = datasets[id];
        ClientJob& job = jobs[slot];
        auto& rec = job.record;
        rec.client_id = id;
        rec.slot = slot;
        rec.samples = data.size();
        rec.mixing_weight = mixing_weight(client.tau, round, cfg.beta);
        rec.download_bytes = down_msg.size();

        const auto start = mix_on_receive(client, view, round, cfg.beta);
        TrainOptions opts;
        opts.epochs = cfg.local_epochs;
        opts.lr = cfg.lr;
        opts.batch_size = cfg.batch_size;
        opts.shuffle_seed = derive_seed(cfg.seed, {seed_tags::kShuffle, static_cast<std::uint64_t>(round), id});
        opts.round = round;
        opts.client_id = id;
        const auto t0 = std::chrono::steady_clock::now();
        auto trained = local_train(model, data, LoraParams::unflatten(layout, start), opts);
        const auto t1 = std::chrono::steady_clock::now();
        rec.compute_s = cfg.compute_seconds.value_or(std::chrono::duration<double>(t1 - t0).count());
        rec.train_loss = trained.loss;
        job.trained = trained.params.flatten();

        const std::size_t seg = assign_segment(slot, static_cast<std::size_t>(round), part.num_segments);
        rec.segment = seg;
        const std::size_t lo = part.begin(seg);
        const std::size_t len = part.size(seg);
        std::vector<float> delta(len);
        for (std::size_t i = 0; i < len; ++i) delta[i] = job.trained[lo + i] - view[lo + i];
        const auto slices = segment_slices(layout, part, seg);
        auto residual = std::span<float>(client.residual.values).subspan(lo, len);
        job.sent = sparsify_slices(delta, residual, slices, report.k_A, report.k_B);
        job.message = encode_message(job.sent, static_cast<std::uint32_t>(round), id,
                                     static_cast<std::uint16_t>(seg), wire);
        rec.upload_bytes = job.message.size();
        rec.upload_dense = len;
        rec.upload_nonzeros = job.sent.nonzeros();
        job.overhead_ops = 2 * total + topk_cost(len) + len + job.sent.nonzeros();
    });

    // Server side, in slot (client id) order.
    std::vector<SegmentUpload> uploads;
    double loss_sum = 0.0;
    double sample_sum = 0.0;
    for (auto& job : jobs) {
        const auto& rec = job.record;
        const auto rx = decode_message(job.message);
        if (rx.client_id != rec.client_id || rx.segment_id != rec.segment) {
            throw ProtocolViolation("upload header does not match its sender");
        }
        const auto slices = segment_slices(layout, part, rec.segment);
        const std::size_t lo = part.begin(rec.segment);
        ClientState& client = clients.at(rec.client_id);
        absorb_wire_error(job.sent, rx.update, slices,
                          std::span<float>(client.residual.values).subspan(lo, rec.upload_dense));

        SegmentUpload up;
        up.client_id = rec.client_id;
        up.samples = static_cast<double>(rec.samples);
        up.segment_id = rec.segment;
        up.values.assign(view.begin() + static_cast<std::ptrdiff_t>(lo),
                         view.begin() + static_cast<std::ptrdiff_t>(lo + rec.upload_dense));
        densify_into(rx.update, slices, up.values);
        loss_sum += up.samples * rec.train_loss;
        sample_sum += up.samples;
        uploads.push_back(std::move(up));

        client.local = std::move(job.trained);
        client.tau = round;
        report.overhead_ops += job.overhead_ops;
        report.clients.push_back(rec);
    }
    server.global = aggregate_segments(uploads, part);
    report.train_loss = loss_sum / sample_sum;
    server.prev_loss = report.train_loss;

    const auto global_params = LoraParams::unflatten(layout, server.global);
    report.global_loss = evaluate_global_loss(model, global_params, datasets);

    std::vector<float> a_vals, b_vals;
    for (const auto& t : layout.tensors()) {
        auto& dst = t.kind == MatrixKind::A ? a_vals : b_vals;
        dst.insert(dst.end(), server.global.begin() + static_cast<std::ptrdiff_t>(t.offset),
                   server.global.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size()));
    }
    report.gini_A = gini(a_vals);
    report.gini_B = gini(b_vals);

    std::vector<ClientTraffic> traffic;
    for (const auto& c : report.clients) traffic.push_back({c.upload_bytes, c.download_bytes, c.compute_s});
    report.time = round_time(traffic, cfg.scenario);
    return report;
}

}  // namespace ecolora
