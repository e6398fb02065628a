// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/half.hpp"

#include <bit>
#include <cmath>

namespace ecolora {

std::uint16_t float_to_half(float value) noexcept {
    constexpr std::uint32_t kInf = 255u << 23;
    constexpr std::uint32_t kHalfOverflow = (127u + 16u) << 23;  // 2^16
    constexpr std::uint32_t kHalfMinNormal = 113u << 23;        // 2^-14
    constexpr std::uint32_t kDenormMagic = ((127u - 15u) + (23u - 10u) + 1u) << 23;

    std::uint32_t f = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = f & 0x80000000u;
    f ^= sign;

    std::uint32_t out;
    if (f >= kHalfOverflow) {
        out = f > kInf ? 0x7E00u : 0x7C00u;
    } else if (f < kHalfMinNormal) {
        // Adding the magic constant shifts the subnormal mantissa into the low
        // bits; the FPU performs the round-to-nearest-even.
        const float shifted = std::bit_cast<float>(f) + std::bit_cast<float>(kDenormMagic);
        out = std::bit_cast<std::uint32_t>(shifted) - kDenormMagic;
    } else {
        const std::uint32_t mant_odd = (f >> 13) & 1u;
        f += (static_cast<std::uint32_t>(15 - 127) << 23) + 0xFFFu;
        f += mant_odd;
        out = f >> 13;
    }
    return static_cast<std::uint16_t>(out | (sign >> 16));
}

float half_to_float(std::uint16_t bits) noexcept {
    const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
    const std::uint32_t exp = (bits >> 10) & 0x1Fu;
    const std::uint32_t mant = bits & 0x3FFu;
    if (exp == 0) {
        const float mag = std::ldexp(static_cast<float>(mant), -24);
        return sign ? -mag : mag;
    }
    if (exp == 31) return std::bit_cast<float>(sign | 0x7F800000u | (mant << 13));
    return std::bit_cast<float>(sign | ((exp + 112u) << 23) | (mant << 13));
}

}  // namespace ecolora
