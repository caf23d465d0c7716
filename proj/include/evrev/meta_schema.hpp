// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evrev {

using Json = nlohmann::ordered_json;

/// Pixel-space rectangle, top-left origin.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct ImageSize {
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Slack allowed when checking a box against the image extent.
inline constexpr double kBoundsTolerancePx = 0.5;

/// Intersection over union; 0 when either box has no area.
double iou(const BBox& a, const BBox& b);

/// Clips `box` to [0, width] x [0, height]. The result may be degenerate.
BBox clip_to(const BBox& box, const ImageSize& size);

/// True when the box is finite with w > 0, h > 0, x >= 0, y >= 0.
bool is_well_formed(const BBox& box);

enum class Source {
  ground_truth,
  predicted,
  model_selected,
  model_generated,
  reviewer_added,
};

std::string_view to_string(Source source);
std::optional<Source> source_from_string(std::string_view text);

/// Strings used in exported documents: "added", "ground_truth", "predicted",
/// "selected", "generated".
std::string_view export_source_string(Source source);
/// Accepts both the export strings and the internal enum names.
std::optional<Source> source_from_any_string(std::string_view text);

struct Provenance {
  Source source = Source::ground_truth;
  bool edited = false;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Region {
  std::string region_id;
  BBox bbox;
  std::optional<std::string> label;
  Provenance provenance;
  // Original dataset id when it did not fit the a_<n> scheme.
  std::optional<std::string> source_id;
  // Tombstone. Deleted regions stay in the record so the edit log replays.
  bool deleted = false;

  friend bool operator==(const Region&, const Region&) = default;
};

enum class QAStatus { unverified, verified, flagged };

std::string_view to_string(QAStatus status);
std::optional<QAStatus> qa_status_from_string(std::string_view text);

struct QAItem {
  std::string qa_id;
  std::string question_text;
  std::string answer_text;
  std::vector<std::string> choices;
  QAStatus status = QAStatus::unverified;
  std::string note;

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

struct AttributionMapping {
  std::string qa_id;
  std::vector<std::string> evidence;  // insertion ordered, no duplicates
  bool no_evidence = false;

  friend bool operator==(const AttributionMapping&, const AttributionMapping&) = default;
};

struct ImageRecord {
  std::string image_uid;
  std::string image_path;
  std::optional<ImageSize> image_size;
  std::string adapter;
  std::vector<QAItem> qa_items;
  std::vector<Region> regions;
  std::vector<AttributionMapping> attributions;
  Json source_metadata = Json::object();

  const Region* find_region(std::string_view id) const;
  Region* find_region(std::string_view id);
  const QAItem* find_qa(std::string_view id) const;
  QAItem* find_qa(std::string_view id);
  const AttributionMapping* find_attribution(std::string_view qa_id) const;
  AttributionMapping* find_attribution(std::string_view qa_id);

  /// dataset_type from source metadata, else the adapter name.
  std::string dataset_type() const;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

enum class Severity { error, warning };

struct Violation {
  std::string path;
  std::string message;
  Severity severity = Severity::error;

  friend bool operator==(const Violation&, const Violation&) = default;
  friend auto operator<=>(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

/// Checks every meta-schema invariant. Deterministic; never throws.
ValidationReport validate_record(const ImageRecord& record);

bool has_errors(const ValidationReport& report);

/// "a_<positive integer>"
bool is_export_region_id(std::string_view id);

/// Next free "a_<n>" / "q_<n>" id given the ones already in the record.
std::string next_region_id(const ImageRecord& record);
std::string next_qa_id(const ImageRecord& record);

// Internal canonical document form used for the workspace and session files.
Json bbox_to_json(const BBox& box);
BBox bbox_from_json(const Json& j);
Json record_to_json(const ImageRecord& record);
ImageRecord record_from_json(const Json& j);

}  // namespace evrev
