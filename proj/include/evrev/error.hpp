// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evrev {

/// Every failure the core can report. The numeric values are mirrored by
/// `evrev_status` in the C API and must stay in sync with evrev.h.
enum class ErrorCode : int {
  Ok = 0,
  InputError = 1,
  IoError = 2,
  ParseError = 3,
  NotAnArray = 10,
  UnrecognizedShape = 11,
  DegenerateBox = 12,
  MissingImageSize = 13,
  NegativeOrigin = 14,
  AdaptationFailed = 15,
  BackendTimeout = 20,
  BackendMalformedReply = 21,
  BackendUnavailable = 22,
  AllRegionsDegenerate = 23,
  NoQAGenerated = 24,
  UnknownQA = 30,
  InvalidRecord = 31,
  AlreadyProposed = 32,
  InvalidTarget = 33,
  IllegalInState = 34,
  GeometryError = 35,
  CorruptLog = 36,
  NotReviewed = 37,
  UnverifiedQA = 38,
  MismatchedInstances = 40,
  EmptyLabelSet = 41,
  DuplicateLabel = 42,
  NotFinalized = 50,
  NotFound = 60,
  Conflict = 61,
  PortInUse = 62,
  BadConfig = 63,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evrev
