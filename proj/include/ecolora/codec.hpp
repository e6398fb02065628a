// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Lossless wire format for sparse updates.
//
// Layout (all header integers little-endian):
//
//   u8  version        1 = Golomb gaps + f16, 2 = fixed-width positions + f16,
//                      3 = dense f32 values (uncompressed baseline)
//   u32 round
//   u32 client id
//   u16 segment id
//   u16 tensor count
//   per tensor: u16 tensor id, u32 dense length, u32 nonzero count, u16 Golomb M
//   payload bitstream (MSB-first): every tensor's position codes in tensor
//   order, then every value in tensor order, zero-padded to a byte boundary.
//
// Position codes for version 1: gaps g0 = p0 + 1, gi = pi - p(i-1), each coded
// as unary quotient floor((g-1)/M) (ones, then a zero) plus the remainder
// (g-1) mod M in truncated binary. Version 2 writes each position in 16 bits
// when the dense length fits, 32 bits otherwise, and stores M = 0. Version 3
// writes no positions: each tensor carries all dense_length values as f32 and
// the zero entries are dropped on decode.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecolora/bitstream.hpp"
#include "ecolora/sparsifier.hpp"

namespace ecolora {

inline constexpr std::size_t kMessageHeaderBytes = 13;
inline constexpr std::size_t kTensorHeaderBytes = 12;

enum class WireFormat : std::uint8_t { Golomb = 1, FixedPositions = 2, DenseF32 = 3 };

const char* to_string(WireFormat format) noexcept;

struct GolombParam {
    std::uint32_t m = 1;

    friend bool operator==(const GolombParam&, const GolombParam&) = default;
};

/// Smallest M >= 1 with (1-k)^M + (1-k)^(M+1) <= 1. k must lie in (0, 1).
GolombParam golomb_param_for(double k);

/// Power-of-two divisor (Rice code): the smallest power of two >= golomb_param_for(k).
GolombParam rice_param_for(double k);

/// Bits used to code one gap (gap >= 1).
std::size_t golomb_code_length(std::uint64_t gap, GolombParam param);

void encode_gap(BitWriter& out, std::uint64_t gap, GolombParam param);

/// Throws ContractViolation when positions are not strictly increasing.
void encode_gaps(BitWriter& out, std::span<const std::uint32_t> positions, GolombParam param);

/// Reads `count` codes. Throws CorruptMessage (naming `tensor_id` and the
/// code index) when the stream runs out.
std::vector<std::uint32_t> decode_gaps(BitReader& in, std::size_t count, GolombParam param,
                                       std::uint32_t tensor_id = 0);

struct EncodeOptions {
    WireFormat format = WireFormat::Golomb;
    bool rice = false;
};

std::vector<std::uint8_t> encode_message(const SparseUpdate& update, std::uint32_t round,
                                         std::uint32_t client_id, std::uint16_t segment_id,
                                         const EncodeOptions& options = {});

struct DecodedMessage {
    WireFormat format = WireFormat::Golomb;
    std::uint32_t round = 0;
    std::uint32_t client_id = 0;
    std::uint16_t segment_id = 0;
    std::vector<std::uint16_t> golomb_m;  // per tensor, as stored
    SparseUpdate update;                  // k_used_* are not on the wire and read back as 0
};

DecodedMessage decode_message(std::span<const std::uint8_t> bytes);

/// Size in bits of the payload before padding.
std::size_t payload_bits(const SparseUpdate& update, const EncodeOptions& options = {});

/// Annotated hex dump of a message, one field per line.
std::string describe_message(std::span<const std::uint8_t> bytes);

struct PositionCost {
    double bits_per_position = 0.0;
    GolombParam param;
};

/// Draws `num_samples` geometric gaps with parameter k, codes them with
/// golomb_param_for(k) (or the Rice divisor) and reports the mean code length.
PositionCost measure_position_cost(double k, std::size_t num_samples, std::uint64_t seed,
                                   bool rice = false);

}  // namespace ecolora
