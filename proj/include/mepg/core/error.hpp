// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mepg {

enum class ErrorCode {
    InvalidBox,
    RepairImpossible,
    IndexOutOfRange,
    GrammarError,
    BackendUnavailable,
    PlanEmpty,
    NoParsableCoordinates,
    TransformError,
    ShapeMismatch,
    NonFiniteActivation,
    EmptyDataset,
    Diverged,
    LabelUnknown,
    KOutOfRange,
    DuplicateId,
    MissingCheckpoint,
    LastGlobalExpertRemoved,
    StepOutOfRange,
    UnknownExpert,
    MaskShapeMismatch,
    AlphaNotNormalized,
    InvalidConfig,
    Format,
    Io,
    QueueFull,
    NotFound,
    NotReady,
    Cancelled,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), m_code(code) {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

/// Raised by the rule grammar; `offset` is the byte offset of the first token
/// that could not be parsed.
class GrammarError : public Error {
public:
    GrammarError(std::size_t offset, const std::string& message)
        : Error(ErrorCode::GrammarError, message + " (at byte " + std::to_string(offset) + ")"),
          m_offset(offset) {}

    std::size_t offset() const noexcept { return m_offset; }

private:
    std::size_t m_offset;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace mepg
