// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/bitstream.hpp"

namespace ecolora {

void BitWriter::put_bit(bool bit) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
    ++bits_;
}

void BitWriter::put_bits(std::uint64_t value, unsigned count) {
    for (unsigned i = count; i-- > 0;) put_bit((value >> i) & 1u);
}

void BitWriter::put_unary(std::uint64_t ones) {
    for (std::uint64_t i = 0; i < ones; ++i) put_bit(true);
    put_bit(false);
}

bool BitReader::read_bit(bool& bit) noexcept {
    if (pos_ >= limit_) return false;
    bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return true;
}

bool BitReader::read_bits(unsigned count, std::uint64_t& value) noexcept {
    if (remaining() < count) return false;
    value = 0;
    for (unsigned i = 0; i < count; ++i) {
        bool b = false;
        read_bit(b);
        value = (value << 1) | (b ? 1u : 0u);
    }
    return true;
}

}  // namespace ecolora
