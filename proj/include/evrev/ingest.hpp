// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/error.hpp"
#include "evrev/meta_schema.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace evrev {

// Raw box shapes found in dataset files.
struct ArrayXYWH { double x, y, w, h; };
struct ArrayCorners { double x1, y1, x2, y2; };
struct NamedLTWH { double left, top, width, height; };
struct NamedCorners { double x1, y1, x2, y2; };
struct FractionalXYWH { double x, y, w, h; };

using RawBBox = std::variant<ArrayXYWH, ArrayCorners, NamedLTWH, NamedCorners, FractionalXYWH>;

/// How an adapter wants bare 4-number arrays read.
enum class ArrayConvention { detect, xywh, corners, fractional };

/// Classifies a bare [a, b, c, d] array.
///
/// With `detect`: all four components in [0, 1] means fractional. Otherwise
/// the array is [x, y, w, h], except when the image size is known, the xywh
/// reading overflows the image and the corners reading is a proper box that
/// fits; then it is [x1, y1, x2, y2].
RawBBox classify_array(const std::array<double, 4>& v, ArrayConvention convention,
                       const std::optional<ImageSize>& image_size);

/// Parses one box value (array, corner-pair array or named-field object).
/// Throws ParseError for anything else.
RawBBox parse_raw_bbox(const Json& value, ArrayConvention convention,
                       const std::optional<ImageSize>& image_size);

struct NormalizedBox {
  BBox box;
  bool clamped = false;  // sub-pixel negative origin was moved to 0
};

/// Converts a raw box into canonical pixel space.
///
/// Errors: DegenerateBox (w or h <= 0, non-finite input, fractional component
/// outside [0, 1]), MissingImageSize (fractional without dimensions),
/// NegativeOrigin (x or y below -0.5 px).
NormalizedBox normalize_bbox(const RawBBox& raw, const std::optional<ImageSize>& image_size);

/// Error that points at one element of the input array.
class RecordError : public Error {
 public:
  RecordError(ErrorCode code, std::size_t index, const std::string& message)
      : Error(code, "record " + std::to_string(index) + ": " + message), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class AdaptationError : public Error {
 public:
  AdaptationError(const std::string& message, ValidationReport violations)
      : Error(ErrorCode::AdaptationFailed, message), violations_(std::move(violations)) {}
  const ValidationReport& violations() const noexcept { return violations_; }

 private:
  ValidationReport violations_;
};

struct AdaptOptions {
  std::string uid_hint;  // used by adapters whose shape carries no uid
};

class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual std::string_view name() const = 0;
  /// Key paths ("a" or "a.b") that must all be present.
  virtual const std::vector<std::string>& fingerprint() const = 0;
  virtual ImageRecord adapt(const Json& raw, const AdaptOptions& options) const = 0;
};

/// Immutable after construction.
class AdapterRegistry {
 public:
  explicit AdapterRegistry(std::vector<std::unique_ptr<Adapter>> adapters);

  /// Most required keys matched wins; ties go to the earlier entry.
  /// Throws UnrecognizedShape.
  const Adapter& detect(const Json& raw) const;
  const Adapter& get(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<std::unique_ptr<Adapter>> adapters_;
};

/// generic_v1, unified_output_v1, then the six dataset-family adapters.
const AdapterRegistry& default_registry();

bool has_key_path(const Json& raw, std::string_view path);

std::string detect_schema(const Json& raw, const AdapterRegistry& registry = default_registry());

ImageRecord adapt_record(const Json& raw, std::string_view adapter,
                         const AdapterRegistry& registry = default_registry(),
                         const AdaptOptions& options = {});

struct LoadedEntry {
  Json raw;
  std::string adapter;
};

/// One entry per array element, file order. NotAnArray / UnrecognizedShape.
std::vector<LoadedEntry> load_dataset(const std::filesystem::path& path,
                                      const AdapterRegistry& registry = default_registry());
std::vector<LoadedEntry> parse_dataset(const Json& doc,
                                       const AdapterRegistry& registry = default_registry());

/// load_dataset + adapt_record for every entry. Duplicate image_uid values
/// are rejected with InvalidRecord.
std::vector<ImageRecord> ingest_file(const std::filesystem::path& path,
                                     const AdapterRegistry& registry = default_registry());

/// Re-ingests an exported `<image_uid>__<qa_id>.json`; the uid comes from the
/// file name.
ImageRecord load_export_document(const std::filesystem::path& path,
                                 const AdapterRegistry& registry = default_registry());

}  // namespace evrev
