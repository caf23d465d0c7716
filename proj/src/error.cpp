// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/error.hpp"

namespace evrev {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InputError: return "InputError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotAnArray: return "NotAnArray";
    case ErrorCode::UnrecognizedShape: return "UnrecognizedShape";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::MissingImageSize: return "MissingImageSize";
    case ErrorCode::NegativeOrigin: return "NegativeOrigin";
    case ErrorCode::AdaptationFailed: return "AdaptationFailed";
    case ErrorCode::BackendTimeout: return "BackendTimeout";
    case ErrorCode::BackendMalformedReply: return "BackendMalformedReply";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::AllRegionsDegenerate: return "AllRegionsDegenerate";
    case ErrorCode::NoQAGenerated: return "NoQAGenerated";
    case ErrorCode::UnknownQA: return "UnknownQA";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::AlreadyProposed: return "AlreadyProposed";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::IllegalInState: return "IllegalInState";
    case ErrorCode::GeometryError: return "GeometryError";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::NotReviewed: return "NotReviewed";
    case ErrorCode::UnverifiedQA: return "UnverifiedQA";
    case ErrorCode::MismatchedInstances: return "MismatchedInstances";
    case ErrorCode::EmptyLabelSet: return "EmptyLabelSet";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::NotFinalized: return "NotFinalized";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

}  // namespace evrev
