// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// MSB-first bit packing. The last byte is zero-padded.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ecolora {

class BitWriter {
public:
    void put_bit(bool bit);
    /// Low `count` bits of `value`, most significant first. count <= 64.
    void put_bits(std::uint64_t value, unsigned count);
    void put_unary(std::uint64_t ones);  // `ones` 1-bits then a 0

    std::size_t bit_size() const noexcept { return bits_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t> take() && { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t bits_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) noexcept
        : bytes_(bytes), limit_(bytes.size() * 8) {}
    BitReader(std::span<const std::uint8_t> bytes, std::size_t bit_limit) noexcept
        : bytes_(bytes), limit_(bit_limit < bytes.size() * 8 ? bit_limit : bytes.size() * 8) {}

    /// False when the stream is exhausted.
    bool read_bit(bool& bit) noexcept;
    bool read_bits(unsigned count, std::uint64_t& value) noexcept;

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return limit_ - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t limit_;
    std::size_t pos_ = 0;
};

}  // namespace ecolora
