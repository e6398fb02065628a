// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/tensor.hpp"

#include "ecolora/error.hpp"

namespace ecolora {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ContractViolation("matmul: inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const float aik = a(i, k);
            if (aik == 0.0f) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

void matvec(const Matrix& m, std::span<const float> x, std::span<float> y) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        float acc = 0.0f;
        const auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
}

void matvec_transposed(const Matrix& m, std::span<const float> x, std::span<float> y) {
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] = 0.0f;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const float xi = x[i];
        const auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += r[j] * xi;
    }
}

}  // namespace ecolora
