// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ecolora {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or construction arguments.
class InvalidConfig : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A caller broke a precondition (mismatched lengths, unsorted positions...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class ProtocolViolation : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class MessageTooLarge : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Raised while decoding a wire message. Carries the tensor and code index
/// at which the stream ran out or went inconsistent.
class CorruptMessage : public Error {
public:
    CorruptMessage(const std::string& what, std::uint32_t tensor_id, std::uint64_t code_index)
        : Error(what + " (tensor " + std::to_string(tensor_id) + ", code " +
                std::to_string(code_index) + ")"),
          tensor_id_(tensor_id),
          code_index_(code_index) {}

    std::uint32_t tensor_id() const noexcept { return tensor_id_; }
    std::uint64_t code_index() const noexcept { return code_index_; }

private:
    std::uint32_t tensor_id_;
    std::uint64_t code_index_;
};

/// Local training produced a non-finite loss.
class DivergedTraining : public Error {
public:
    DivergedTraining(int round, std::uint32_t client_id)
        : Error("training diverged in round " + std::to_string(round) + " on client " +
                std::to_string(client_id)),
          round_(round),
          client_id_(client_id) {}

    int round() const noexcept { return round_; }
    std::uint32_t client_id() const noexcept { return client_id_; }

private:
    int round_;
    std::uint32_t client_id_;
};

}  // namespace ecolora
