// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/export.hpp"
#include "evrev/metrics.hpp"
#include "evrev/proposal.hpp"
#include "evrev/review_session.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace evrev {

struct WorkspaceConfig {
  std::filesystem::path data_dir = "evrev-data";
  std::string backend = "mock";  // "mock" | "http"
  HttpBackendConfig http;
  std::uint64_t mock_seed = 0;
  double retain_iou = kDefaultRetainIou;
  int backend_concurrency = 4;
};

struct StoredRecord {
  ImageRecord record;
  std::filesystem::path base_dir;  // relative image paths resolve against this
};

/// Counts of every finalized session under `dir`, tagged with the dataset
/// type. Also reads `*.counts.json` summaries: {"dataset_type", "counts"} or
/// an array of them.
std::vector<std::pair<std::string, UtilityCounts>> collect_session_counts(
    const std::filesystem::path& dir);

/// Labels from one or more CSV files. With several files each file is one
/// rater and its annotator_id column is replaced by the file position.
LabelSet load_label_files(const std::vector<std::filesystem::path>& files);

/// Service-facing view of a session.
Json session_to_json(const ReviewSession& session);

/// File-backed store of ingested records and review sessions.
///
/// Layout under data_dir: records.json and sessions/. Every mutation of one
/// (image_uid, qa_id) session runs under that session's mutex; distinct
/// sessions proceed in parallel.
class Workspace {
 public:
  explicit Workspace(WorkspaceConfig config);

  const WorkspaceConfig& config() const { return config_; }
  const std::filesystem::path& data_dir() const { return config_.data_dir; }
  std::filesystem::path sessions_dir() const { return config_.data_dir / "sessions"; }

  /// Adapts every record of the dataset file and stores it, replacing
  /// records with the same image_uid. Returns the stored uids in file order.
  std::vector<std::string> ingest(const std::filesystem::path& dataset);

  std::vector<StoredRecord> records() const;
  StoredRecord record(const std::string& uid) const;  // NotFound
  std::filesystem::path image_path(const StoredRecord& stored) const;

  /// Opens the session if needed and attaches a backend proposal.
  Json propose(const std::string& uid, const std::string& qa_id);
  Json apply_edit(const std::string& uid, const std::string& qa_id, EditOp op);
  Json finalize(const std::string& uid, const std::string& qa_id);
  Json session(const std::string& uid, const std::string& qa_id) const;
  ReviewSession load_session(const std::string& uid, const std::string& qa_id) const;

  /// Every stored session, loaded. Sessions that fail to load are reported
  /// through `errors` when given, otherwise rethrown.
  std::vector<ReviewSession> sessions(std::vector<std::string>* errors = nullptr) const;

  /// Writes every finalized session to out_dir.
  std::vector<std::filesystem::path> export_all(const std::filesystem::path& out_dir,
                                                bool overlay) const;

  std::vector<UtilityRow> utility() const;

  ProposalBackend& backend();

 private:
  std::mutex& session_mutex(const std::string& key);
  void save_records() const;

  WorkspaceConfig config_;
  SessionStore store_;
  mutable std::mutex records_mu_;
  std::vector<StoredRecord> records_;

  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;

  std::mutex backend_mu_;
  std::shared_ptr<ProposalBackend> backend_;
};

}  // namespace evrev
