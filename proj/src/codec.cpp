// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/codec.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ecolora/error.hpp"
#include "ecolora/half.hpp"
#include "ecolora/rng.hpp"

namespace ecolora {

const char* to_string(WireFormat format) noexcept {
    switch (format) {
        case WireFormat::Golomb: return "golomb";
        case WireFormat::FixedPositions: return "fixed-positions";
        case WireFormat::DenseF32: return "dense-f32";
    }
    return "unknown";
}

GolombParam golomb_param_for(double k) {
    if (!(k > 0.0 && k < 1.0)) throw InvalidArgument("golomb_param_for: k must lie in (0, 1)");
    const double log_q = std::log1p(-k);  // log(1 - k) < 0
    const double log_two_minus_k = std::log(2.0 - k);
    auto holds = [&](double m) { return m * log_q + log_two_minus_k <= 0.0; };
    double m = std::max(1.0, std::ceil(log_two_minus_k / -log_q));
    while (m > 1.0 && holds(m - 1.0)) m -= 1.0;
    while (!holds(m)) m += 1.0;
    if (m > static_cast<double>(std::numeric_limits<std::uint16_t>::max())) {
        throw InvalidArgument("golomb_param_for: k too small for a 16-bit divisor");
    }
    return {static_cast<std::uint32_t>(m)};
}

GolombParam rice_param_for(double k) {
    const auto m = golomb_param_for(k).m;
    return {std::bit_ceil(m)};
}

namespace {

unsigned ceil_log2(std::uint32_t m) noexcept { return m <= 1 ? 0u : static_cast<unsigned>(std::bit_width(m - 1)); }

}  // namespace

std::size_t golomb_code_length(std::uint64_t gap, GolombParam param) {
    const std::uint64_t v = gap - 1;
    const std::uint64_t q = v / param.m;
    const std::uint64_t r = v % param.m;
    const unsigned b = ceil_log2(param.m);
    const std::uint64_t cutoff = (std::uint64_t{1} << b) - param.m;
    return static_cast<std::size_t>(q + 1 + (r < cutoff ? b - 1 : b));
}

void encode_gap(BitWriter& out, std::uint64_t gap, GolombParam param) {
    if (gap == 0) throw ContractViolation("encode_gap: gaps start at 1");
    if (param.m == 0) throw InvalidArgument("encode_gap: Golomb divisor must be positive");
    const std::uint64_t v = gap - 1;
    const std::uint64_t r = v % param.m;
    out.put_unary(v / param.m);
    const unsigned b = ceil_log2(param.m);
    const std::uint64_t cutoff = (std::uint64_t{1} << b) - param.m;
    if (r < cutoff) {
        out.put_bits(r, b - 1);
    } else {
        out.put_bits(r + cutoff, b);
    }
}

void encode_gaps(BitWriter& out, std::span<const std::uint32_t> positions, GolombParam param) {
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const std::uint64_t p = positions[i];
        if (i > 0 && p <= prev) {
            throw ContractViolation("encode_gaps: positions must be strictly increasing (index " +
                                    std::to_string(i) + ")");
        }
        encode_gap(out, i == 0 ? p + 1 : p - prev, param);
        prev = p;
    }
}

std::vector<std::uint32_t> decode_gaps(BitReader& in, std::size_t count, GolombParam param,
                                       std::uint32_t tensor_id) {
    if (param.m == 0) throw CorruptMessage("zero Golomb divisor", tensor_id, 0);
    const unsigned b = ceil_log2(param.m);
    const std::uint64_t cutoff = (std::uint64_t{1} << b) - param.m;
    std::vector<std::uint32_t> positions;
    positions.reserve(count);
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t q = 0;
        bool bit = true;
        for (;;) {
            if (!in.read_bit(bit)) throw CorruptMessage("stream ended inside a quotient", tensor_id, i);
            if (!bit) break;
            ++q;
        }
        std::uint64_t r = 0;
        if (b > 0) {
            if (!in.read_bits(b - 1, r)) throw CorruptMessage("stream ended inside a remainder", tensor_id, i);
            if (r >= cutoff) {
                bool low = false;
                if (!in.read_bit(low)) throw CorruptMessage("stream ended inside a remainder", tensor_id, i);
                r = ((r << 1) | (low ? 1u : 0u)) - cutoff;
            }
        }
        const std::uint64_t gap = q * param.m + r + 1;
        pos = i == 0 ? gap - 1 : pos + gap;
        if (pos > std::numeric_limits<std::uint32_t>::max()) {
            throw CorruptMessage("position overflows 32 bits", tensor_id, i);
        }
        positions.push_back(static_cast<std::uint32_t>(pos));
    }
    return positions;
}

namespace {

constexpr std::uint64_t kU32Max = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint64_t kU16Max = std::numeric_limits<std::uint16_t>::max();

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[at + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

unsigned fixed_position_width(std::uint32_t dense_length) noexcept { return dense_length <= 65536u ? 16u : 32u; }

GolombParam param_for_tensor(const SparseUpdate& u, const TensorUpdate& t, const EncodeOptions& options) {
    const double k = u.k_for(t.kind);
    if (!(k > 0.0)) throw InvalidArgument("encode_message: k_used must be positive");
    if (k >= 1.0) return {1};
    return options.rice ? rice_param_for(k) : golomb_param_for(k);
}

MatrixKind kind_of(std::uint16_t tensor_id) noexcept { return tensor_id % 2 == 0 ? MatrixKind::A : MatrixKind::B; }

}  // namespace

std::size_t payload_bits(const SparseUpdate& update, const EncodeOptions& options) {
    std::size_t bits = 0;
    for (const auto& t : update.tensors) {
        switch (options.format) {
            case WireFormat::Golomb: {
                const auto param = param_for_tensor(update, t, options);
                std::uint64_t prev = 0;
                for (std::size_t i = 0; i < t.positions.size(); ++i) {
                    bits += golomb_code_length(i == 0 ? t.positions[i] + 1ull : t.positions[i] - prev, param);
                    prev = t.positions[i];
                }
                bits += 16 * t.nonzeros();
                break;
            }
            case WireFormat::FixedPositions:
                bits += (fixed_position_width(t.dense_length) + 16) * t.nonzeros();
                break;
            case WireFormat::DenseF32:
                bits += 32ull * t.dense_length;
                break;
        }
    }
    return bits;
}

std::vector<std::uint8_t> encode_message(const SparseUpdate& update, std::uint32_t round,
                                         std::uint32_t client_id, std::uint16_t segment_id,
                                         const EncodeOptions& options) {
    if (update.tensors.size() > kU16Max) throw MessageTooLarge("encode_message: more than 65535 tensors");

    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(options.format));
    put_le(out, round, 4);
    put_le(out, client_id, 4);
    put_le(out, segment_id, 2);
    put_le(out, update.tensors.size(), 2);

    std::vector<GolombParam> params;
    for (const auto& t : update.tensors) {
        if (t.positions.size() != t.values.size()) throw ContractViolation("encode_message: positions/values mismatch");
        if (t.positions.size() > kU32Max) throw MessageTooLarge("encode_message: nonzero count exceeds u32");
        if (!t.positions.empty() && t.positions.back() >= t.dense_length) {
            throw ContractViolation("encode_message: position beyond dense length");
        }
        GolombParam p{0};
        if (options.format == WireFormat::Golomb) p = param_for_tensor(update, t, options);
        if (p.m > kU16Max) throw MessageTooLarge("encode_message: Golomb divisor exceeds u16");
        params.push_back(p);
        put_le(out, t.tensor_id, 2);
        put_le(out, t.dense_length, 4);
        put_le(out, t.positions.size(), 4);
        put_le(out, p.m, 2);
    }

    BitWriter bits;
    for (std::size_t k = 0; k < update.tensors.size(); ++k) {
        const auto& t = update.tensors[k];
        if (options.format == WireFormat::Golomb) {
            encode_gaps(bits, t.positions, params[k]);
        } else if (options.format == WireFormat::FixedPositions) {
            const unsigned width = fixed_position_width(t.dense_length);
            for (std::size_t i = 0; i < t.positions.size(); ++i) {
                if (i > 0 && t.positions[i] <= t.positions[i - 1]) {
                    throw ContractViolation("encode_message: positions must be strictly increasing");
                }
                bits.put_bits(t.positions[i], width);
            }
        }
    }
    for (const auto& t : update.tensors) {
        if (options.format == WireFormat::DenseF32) {
            std::vector<float> dense(t.dense_length, 0.0f);
            for (std::size_t i = 0; i < t.positions.size(); ++i) dense[t.positions[i]] = t.values[i];
            for (float v : dense) bits.put_bits(std::bit_cast<std::uint32_t>(v), 32);
        } else {
            for (float v : t.values) bits.put_bits(float_to_half(v), 16);
        }
    }
    const auto payload = std::move(bits).take();
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

DecodedMessage decode_message(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMessageHeaderBytes) throw CorruptMessage("message shorter than its header", 0, 0);
    DecodedMessage msg;
    const std::uint8_t version = bytes[0];
    if (version < 1 || version > 3) throw CorruptMessage("unknown wire version " + std::to_string(version), 0, 0);
    msg.format = static_cast<WireFormat>(version);
    msg.round = static_cast<std::uint32_t>(get_le(bytes, 1, 4));
    msg.client_id = static_cast<std::uint32_t>(get_le(bytes, 5, 4));
    msg.segment_id = static_cast<std::uint16_t>(get_le(bytes, 9, 2));
    const auto tensor_count = static_cast<std::size_t>(get_le(bytes, 11, 2));
    const std::size_t header_end = kMessageHeaderBytes + kTensorHeaderBytes * tensor_count;
    if (bytes.size() < header_end) throw CorruptMessage("tensor table truncated", 0, 0);

    std::vector<std::size_t> counts;
    for (std::size_t k = 0; k < tensor_count; ++k) {
        const std::size_t at = kMessageHeaderBytes + kTensorHeaderBytes * k;
        TensorUpdate t;
        t.tensor_id = static_cast<std::uint16_t>(get_le(bytes, at, 2));
        t.kind = kind_of(t.tensor_id);
        t.dense_length = static_cast<std::uint32_t>(get_le(bytes, at + 2, 4));
        counts.push_back(static_cast<std::size_t>(get_le(bytes, at + 6, 4)));
        msg.golomb_m.push_back(static_cast<std::uint16_t>(get_le(bytes, at + 10, 2)));
        if (counts.back() > t.dense_length) throw CorruptMessage("more nonzeros than dense length", t.tensor_id, 0);
        msg.update.tensors.push_back(std::move(t));
    }
    msg.update.k_used_A = 0.0;
    msg.update.k_used_B = 0.0;

    BitReader in(bytes.subspan(header_end));
    for (std::size_t k = 0; k < tensor_count; ++k) {
        auto& t = msg.update.tensors[k];
        if (msg.format == WireFormat::Golomb) {
            t.positions = decode_gaps(in, counts[k], {msg.golomb_m[k]}, t.tensor_id);
        } else if (msg.format == WireFormat::FixedPositions) {
            const unsigned width = fixed_position_width(t.dense_length);
            for (std::size_t i = 0; i < counts[k]; ++i) {
                std::uint64_t p = 0;
                if (!in.read_bits(width, p)) throw CorruptMessage("stream ended inside a position", t.tensor_id, i);
                if (i > 0 && p <= t.positions.back()) throw CorruptMessage("positions not increasing", t.tensor_id, i);
                t.positions.push_back(static_cast<std::uint32_t>(p));
            }
        }
        if (!t.positions.empty() && t.positions.back() >= t.dense_length) {
            throw CorruptMessage("position beyond dense length", t.tensor_id, t.positions.size() - 1);
        }
    }
    for (std::size_t k = 0; k < tensor_count; ++k) {
        auto& t = msg.update.tensors[k];
        if (msg.format == WireFormat::DenseF32) {
            for (std::uint32_t i = 0; i < t.dense_length; ++i) {
                std::uint64_t raw = 0;
                if (!in.read_bits(32, raw)) throw CorruptMessage("stream ended inside a value", t.tensor_id, i);
                const float v = std::bit_cast<float>(static_cast<std::uint32_t>(raw));
                if (v != 0.0f) {
                    t.positions.push_back(i);
                    t.values.push_back(v);
                }
            }
            if (t.positions.size() != counts[k]) throw CorruptMessage("nonzero count disagrees with payload", t.tensor_id, 0);
        } else {
            for (std::size_t i = 0; i < counts[k]; ++i) {
                std::uint64_t raw = 0;
                if (!in.read_bits(16, raw)) throw CorruptMessage("stream ended inside a value", t.tensor_id, i);
                t.values.push_back(half_to_float(static_cast<std::uint16_t>(raw)));
            }
        }
    }

    const std::size_t used_bytes = (in.position() + 7) / 8;
    if (header_end + used_bytes != bytes.size()) {
        throw CorruptMessage("message has " + std::to_string(bytes.size() - header_end - used_bytes) +
                                 " unexpected trailing bytes",
                             0, 0);
    }
    bool pad = false;
    while (in.read_bit(pad)) {
        if (pad) throw CorruptMessage("nonzero padding bits", 0, 0);
    }
    return msg;
}

std::string describe_message(std::span<const std::uint8_t> bytes) {
    std::ostringstream os;
    auto hex = [&](std::size_t from, std::size_t len) {
        std::string s;
        char buf[4];
        for (std::size_t i = from; i < from + len && i < bytes.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%02x ", bytes[i]);
            s += buf;
        }
        return s;
    };
    const auto msg = decode_message(bytes);
    os << "00000000  " << hex(0, 1) << "            version " << static_cast<int>(msg.format) << " ("
       << to_string(msg.format) << ")\n";
    os << "00000001  " << hex(1, 4) << "   round " << msg.round << "\n";
    os << "00000005  " << hex(5, 4) << "   client " << msg.client_id << "\n";
    os << "00000009  " << hex(9, 2) << "         segment " << msg.segment_id << "\n";
    os << "0000000b  " << hex(11, 2) << "         tensors " << msg.update.tensors.size() << "\n";
    for (std::size_t k = 0; k < msg.update.tensors.size(); ++k) {
        const auto& t = msg.update.tensors[k];
        const std::size_t at = kMessageHeaderBytes + kTensorHeaderBytes * k;
        char off[16];
        std::snprintf(off, sizeof off, "%08zx", at);
        os << off << "  " << hex(at, 12) << " tensor " << t.tensor_id << " (" << to_string(t.kind)
           << ") len " << t.dense_length << " nnz " << t.nonzeros() << " M " << msg.golomb_m[k] << "\n";
    }
    const std::size_t payload_at = kMessageHeaderBytes + kTensorHeaderBytes * msg.update.tensors.size();
    os << "payload " << bytes.size() - payload_at << " bytes:\n";
    for (std::size_t at = payload_at; at < bytes.size(); at += 16) {
        char off[16];
        std::snprintf(off, sizeof off, "%08zx", at);
        os << off << "  " << hex(at, std::min<std::size_t>(16, bytes.size() - at)) << "\n";
    }
    for (const auto& t : msg.update.tensors) {
        os << "tensor " << t.tensor_id << ":";
        const std::size_t shown = std::min<std::size_t>(t.nonzeros(), 8);
        for (std::size_t i = 0; i < shown; ++i) os << " [" << t.positions[i] << "]=" << t.values[i];
        if (shown < t.nonzeros()) os << " ...";
        os << "\n";
    }
    return os.str();
}

PositionCost measure_position_cost(double k, std::size_t num_samples, std::uint64_t seed, bool rice) {
    if (!(k > 0.0 && k < 1.0)) throw InvalidArgument("measure_position_cost: k must lie in (0, 1)");
    if (num_samples == 0) throw InvalidArgument("measure_position_cost: need at least one sample");
    const GolombParam param = rice ? rice_param_for(k) : golomb_param_for(k);
    Rng rng(seed);
    const double log_q = std::log1p(-k);
    BitWriter out;
    for (std::size_t i = 0; i < num_samples; ++i) {
        // Inverse CDF of P(n) = (1-k)^(n-1) k on n >= 1; u in (0, 1].
        const double u = 1.0 - uniform01(rng);
        const auto gap = static_cast<std::uint64_t>(1.0 + std::floor(std::log(u) / log_q));
        encode_gap(out, gap, param);
    }
    return {static_cast<double>(out.bit_size()) / static_cast<double>(num_samples), param};
}

}  // namespace ecolora
