// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/meta_schema.hpp"
#include "evrev/proposal.hpp"
#include "evrev/utility_counts.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evrev {

enum class EditKind {
  select_region,
  deselect_region,
  resize_region,
  move_region,
  delete_region,
  draw_region,
  add_qa,
  edit_qa,
  verify_qa,
  flag_qa,
  set_no_evidence,
};

std::string_view to_string(EditKind kind);
std::optional<EditKind> edit_kind_from_string(std::string_view text);

/// One reviewer action. Payload shapes:
///   resize/move/draw: {"bbox": [x, y, w, h], "label"?: text}
///   add_qa/edit_qa:   {"question_text"?, "answer_text"?, "choices"?}
///   flag_qa:          {"note": text}
///   set_no_evidence:  {"value"?: bool}  (defaults to true)
struct EditOp {
  EditKind op = EditKind::select_region;
  std::string target_id;
  Json payload = Json::object();
  std::uint64_t timestamp = 0;  // 0 on input means "assign the next one"
  std::string actor;

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

Json edit_to_json(const EditOp& op);
EditOp edit_from_json(const Json& j);

enum class SessionState { loaded, proposed, in_review, flagged, finalized };

std::string_view to_string(SessionState state);

struct ProposalSnapshot {
  ProposalMode mode = ProposalMode::selection;
  ProposalResponse response;
};

Json snapshot_to_json(const ProposalSnapshot& snapshot);
ProposalSnapshot snapshot_from_json(const Json& j);

/// Everything derived from (record, snapshot, edit log). Two sessions with
/// equal inputs produce equal views.
struct SessionView {
  ImageRecord record;
  std::string active_qa;
  SessionState state = SessionState::loaded;
  std::optional<ProposalMode> mode;
  std::vector<std::string> proposed;  // P, proposal order
  std::map<std::string, BBox> proposed_geometry;
  std::vector<std::string> evidence;  // H, insertion order
  bool no_evidence = false;
  std::uint64_t last_timestamp = 0;

  bool in_evidence(std::string_view id) const;
  bool is_proposed(std::string_view id) const;

  friend bool operator==(const SessionView&, const SessionView&) = default;
};

Json view_to_json(const SessionView& view);

inline constexpr double kDefaultRetainIou = 0.5;

/// Classifies the final evidence set H against the proposal P.
///
/// A proposed region is retained when it is still in H and its geometry has
/// IoU >= retain_iou with the proposed geometry. Otherwise it is effectively
/// removed; if it is still in H it also counts as newly drawn. Regions in H
/// outside P count as new_drawn when reviewer-added and as added_gt otherwise.
UtilityCounts classify(const SessionView& view, double retain_iou = kDefaultRetainIou);

SessionView initial_view(const ImageRecord& record, const std::string& active_qa);

/// State loaded -> proposed. Throws AlreadyProposed, InvalidTarget.
void apply_proposal(SessionView& view, const ProposalSnapshot& snapshot);

/// Applies one op in place with the strong exception guarantee. Fills in
/// op.timestamp when it is 0 and op.target_id for draw_region/add_qa.
void apply_op(SessionView& view, EditOp& op);

/// Pure reconstruction. CorruptLog on non-monotonic timestamps or ops that
/// no longer apply.
SessionView replay(const ImageRecord& record, const std::string& active_qa,
                   const std::optional<ProposalSnapshot>& snapshot,
                   const std::vector<EditOp>& edit_log);

struct FinalAttribution {
  std::string qa_id;
  std::vector<std::string> evidence;
  bool no_evidence = false;

  friend bool operator==(const FinalAttribution&, const FinalAttribution&) = default;
};

struct FinalResult {
  FinalAttribution attribution;
  UtilityCounts counts;
  double retain_iou = kDefaultRetainIou;

  friend bool operator==(const FinalResult&, const FinalResult&) = default;
};

Json final_to_json(const FinalResult& result);
FinalResult final_from_json(const Json& j);

struct FailureEvent {
  std::string code;
  std::string message;
  std::uint64_t after_timestamp = 0;
};

/// Event-sourced review of one QA item of one record.
class ReviewSession {
 public:
  /// InvalidRecord when the record fails validation; UnknownQA when qa_id is
  /// not in the record. A record with no QA items accepts "" or "q_0" and
  /// goes through QA generation.
  static ReviewSession open(ImageRecord record, std::string qa_id);

  /// Rebuilds a persisted session. CorruptLog when the parts disagree.
  static ReviewSession restore(ImageRecord base, std::string qa_id,
                               std::optional<ProposalSnapshot> snapshot,
                               std::vector<EditOp> edit_log, std::vector<FailureEvent> failures,
                               std::optional<FinalResult> final_result);

  const std::string& image_uid() const { return base_.image_uid; }
  const std::string& qa_id() const { return qa_id_; }
  const ImageRecord& base_record() const { return base_; }
  const SessionView& view() const { return view_; }
  SessionState state() const { return view_.state; }
  const std::optional<ProposalSnapshot>& snapshot() const { return snapshot_; }
  const std::vector<EditOp>& edit_log() const { return log_; }
  const std::vector<FailureEvent>& failures() const { return failures_; }
  const std::optional<FinalResult>& final_result() const { return final_; }

  /// Mode this session will ask the backend for.
  ProposalMode proposal_mode() const;
  ProposalRequest proposal_request(ImagePayload image = {}) const;

  void attach_proposal(ProposalSnapshot snapshot);

  /// Calls the backend and attaches the response. A backend failure leaves
  /// the session untouched apart from a recorded FailureEvent, then rethrows.
  void propose(ProposalBackend& backend, ImagePayload image = {});

  const EditOp& apply_edit(EditOp op);

  const FinalResult& finalize(double retain_iou = kDefaultRetainIou);

 private:
  ReviewSession(ImageRecord base, std::string qa_id);

  ImageRecord base_;
  std::string qa_id_;
  std::optional<ProposalSnapshot> snapshot_;
  std::vector<EditOp> log_;
  std::vector<FailureEvent> failures_;
  std::optional<FinalResult> final_;
  SessionView view_;
};

/// File layout: <dir>/<uid>__<qa>.snapshot.json and <uid>__<qa>.log.jsonl.
/// The log is append-only, one EditOp per line.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path snapshot_path(const std::string& uid, const std::string& qa) const;
  std::filesystem::path log_path(const std::string& uid, const std::string& qa) const;

  bool exists(const std::string& uid, const std::string& qa) const;
  void save_snapshot(const ReviewSession& session) const;
  void append_edit(const ReviewSession& session, const EditOp& op) const;
  ReviewSession load(const std::string& uid, const std::string& qa) const;
  ReviewSession load_file(const std::filesystem::path& snapshot_file) const;

  /// Snapshot files in name order.
  std::vector<std::filesystem::path> list() const;

 private:
  std::filesystem::path dir_;
};

Json session_snapshot_document(const ReviewSession& session);

}  // namespace evrev
