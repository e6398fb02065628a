// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace ecolora {

/// IEEE 754 binary32 -> binary16, round to nearest, ties to even.
/// Overflow saturates to infinity; NaN becomes a quiet NaN.
std::uint16_t float_to_half(float value) noexcept;

/// Exact binary16 -> binary32 widening.
float half_to_float(std::uint16_t bits) noexcept;

/// One float -> half -> float trip.
inline float round_to_half(float value) noexcept { return half_to_float(float_to_half(value)); }

}  // namespace ecolora
