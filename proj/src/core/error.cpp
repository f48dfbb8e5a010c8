// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/core/error.hpp"

namespace mepg {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidBox: return "InvalidBox";
        case ErrorCode::RepairImpossible: return "RepairImpossible";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::GrammarError: return "GrammarError";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::PlanEmpty: return "PlanEmpty";
        case ErrorCode::NoParsableCoordinates: return "NoParsableCoordinates";
        case ErrorCode::TransformError: return "TransformError";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::LabelUnknown: return "LabelUnknown";
        case ErrorCode::KOutOfRange: return "KOutOfRange";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
        case ErrorCode::LastGlobalExpertRemoved: return "LastGlobalExpertRemoved";
        case ErrorCode::StepOutOfRange: return "StepOutOfRange";
        case ErrorCode::UnknownExpert: return "UnknownExpert";
        case ErrorCode::MaskShapeMismatch: return "MaskShapeMismatch";
        case ErrorCode::AlphaNotNormalized: return "AlphaNotNormalized";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Format: return "Format";
        case ErrorCode::Io: return "Io";
        case ErrorCode::QueueFull: return "QueueFull";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::NotReady: return "NotReady";
        case ErrorCode::Cancelled: return "Cancelled";
    }
    return "Unknown";
}

}  // namespace mepg
