// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/meta_schema.hpp"
#include "evrev/review_session.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evrev {

/// One evidence region as it appears in an exported document.
struct ExportedRegion {
  std::string id;
  BBox bbox;
  std::string label;
  std::string source;  // export string, see export_source_string
};

/// Final evidence of a finalized session in evidence order, tombstones
/// excluded. Proposed regions of a selection proposal report "selected".
/// Throws NotFinalized.
std::vector<ExportedRegion> final_evidence(const ReviewSession& session);

/// The per-image output document. Throws NotFinalized.
Json export_record(const ReviewSession& session);

/// `<image_uid>__<qa_id>` for the export file names.
std::string export_basename(const ReviewSession& session);

/// SVG overlay: the image by path, one <rect> per region, and a legend.
/// Throws MissingImageSize.
std::string export_overlay(const ImageRecord& record, const std::vector<ExportedRegion>& regions);
std::string export_overlay(const ReviewSession& session);

/// Stroke color used for a source string in overlays and the UI legend.
std::string_view source_color(std::string_view export_source);

/// Writes `<base>.json` (and `<base>.svg` when `overlay`) into `out_dir`.
/// Returns the written paths.
std::vector<std::filesystem::path> write_export(const ReviewSession& session,
                                                const std::filesystem::path& out_dir,
                                                bool overlay);

/// Generic input-shape writer. The generic adapter reads its output back into
/// an equal record (tombstoned regions are dropped).
Json write_generic_record(const ImageRecord& record);
Json write_generic_dataset(const std::vector<ImageRecord>& records);

}  // namespace evrev
