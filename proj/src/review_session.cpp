// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/review_session.hpp"

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <utility>

namespace evrev {

namespace {

constexpr std::array<std::pair<EditKind, std::string_view>, 11> kEditNames{{
    {EditKind::select_region, "select_region"},
    {EditKind::deselect_region, "deselect_region"},
    {EditKind::resize_region, "resize_region"},
    {EditKind::move_region, "move_region"},
    {EditKind::delete_region, "delete_region"},
    {EditKind::draw_region, "draw_region"},
    {EditKind::add_qa, "add_qa"},
    {EditKind::edit_qa, "edit_qa"},
    {EditKind::verify_qa, "verify_qa"},
    {EditKind::flag_qa, "flag_qa"},
    {EditKind::set_no_evidence, "set_no_evidence"},
}};

constexpr std::string_view kSessionFormat = "evrev.session.v1";

bool contains(const std::vector<std::string>& ids, std::string_view id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

void erase_id(std::vector<std::string>& ids, std::string_view id) {
  ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
}

Region& live_region(ImageRecord& record, const std::string& id) {
  Region* r = record.find_region(id);
  if (r == nullptr || r->deleted) {
    throw Error(ErrorCode::InvalidTarget, "no live region " + id);
  }
  return *r;
}

QAItem& qa_target(ImageRecord& record, const std::string& id) {
  QAItem* qa = record.find_qa(id);
  if (qa == nullptr) throw Error(ErrorCode::InvalidTarget, "no QA item " + id);
  return *qa;
}

BBox payload_box(const EditOp& op, const std::optional<ImageSize>& size) {
  auto it = op.payload.find("bbox");
  if (it == op.payload.end()) {
    throw Error(ErrorCode::GeometryError, std::string(to_string(op.op)) + " needs a bbox");
  }
  BBox box;
  try {
    box = bbox_from_json(*it);
  } catch (const Error& e) {
    throw Error(ErrorCode::GeometryError, e.what());
  }
  if (!is_well_formed(box)) {
    throw Error(ErrorCode::GeometryError, "degenerate box");
  }
  if (size && (box.right() > size->width + kBoundsTolerancePx ||
               box.bottom() > size->height + kBoundsTolerancePx)) {
    throw Error(ErrorCode::GeometryError, "box extends past the image");
  }
  return box;
}

std::string str_field(const Json& payload, const char* key) {
  auto it = payload.find(key);
  if (it == payload.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(ErrorCode::InputError, std::string(key) + " must be a string");
  return it->get<std::string>();
}

void set_qa_fields(QAItem& qa, const Json& payload) {
  if (payload.contains("question_text")) qa.question_text = str_field(payload, "question_text");
  if (payload.contains("answer_text")) qa.answer_text = str_field(payload, "answer_text");
  if (auto it = payload.find("choices"); it != payload.end()) {
    if (!it->is_array()) throw Error(ErrorCode::InputError, "choices must be an array");
    qa.choices.clear();
    for (const auto& c : *it) {
      if (!c.is_string()) throw Error(ErrorCode::InputError, "choices must be strings");
      qa.choices.push_back(c.get<std::string>());
    }
  }
}

void require_active(const SessionView& view, const std::string& id, EditKind kind) {
  if (id != view.active_qa) {
    throw Error(ErrorCode::InvalidTarget,
                std::string(to_string(kind)) + " applies to the active QA " + view.active_qa);
  }
}

void mutate(SessionView& v, EditOp& op) {
  ImageRecord& rec = v.record;
  const bool qa_op = op.op == EditKind::edit_qa || op.op == EditKind::verify_qa ||
                     op.op == EditKind::flag_qa || op.op == EditKind::set_no_evidence;
  if (qa_op && op.target_id.empty()) op.target_id = v.active_qa;

  switch (op.op) {
    case EditKind::select_region: {
      live_region(rec, op.target_id);
      if (!contains(v.evidence, op.target_id)) v.evidence.push_back(op.target_id);
      v.no_evidence = false;
      break;
    }
    case EditKind::deselect_region: {
      live_region(rec, op.target_id);
      erase_id(v.evidence, op.target_id);
      break;
    }
    case EditKind::resize_region:
    case EditKind::move_region: {
      Region& r = live_region(rec, op.target_id);
      const BBox box = payload_box(op, rec.image_size);
      if (op.op == EditKind::move_region && (box.w != r.bbox.w || box.h != r.bbox.h)) {
        throw Error(ErrorCode::GeometryError, "move_region must keep width and height");
      }
      r.bbox = box;
      r.provenance.edited = true;
      break;
    }
    case EditKind::delete_region: {
      Region& r = live_region(rec, op.target_id);
      r.deleted = true;
      erase_id(v.evidence, op.target_id);
      break;
    }
    case EditKind::draw_region: {
      const BBox box = payload_box(op, rec.image_size);
      if (op.target_id.empty()) {
        op.target_id = next_region_id(rec);
      } else if (!is_export_region_id(op.target_id) || rec.find_region(op.target_id)) {
        throw Error(ErrorCode::InvalidTarget, "cannot create region " + op.target_id);
      }
      Region r;
      r.region_id = op.target_id;
      r.bbox = box;
      if (auto label = str_field(op.payload, "label"); op.payload.contains("label")) {
        r.label = std::move(label);
      }
      r.provenance = {Source::reviewer_added, false};
      rec.regions.push_back(std::move(r));
      v.evidence.push_back(op.target_id);
      v.no_evidence = false;
      break;
    }
    case EditKind::add_qa: {
      if (op.target_id.empty()) {
        op.target_id = next_qa_id(rec);
      } else if (rec.find_qa(op.target_id)) {
        throw Error(ErrorCode::InvalidTarget, "QA item exists: " + op.target_id);
      }
      QAItem qa;
      qa.qa_id = op.target_id;
      set_qa_fields(qa, op.payload);
      rec.qa_items.push_back(std::move(qa));
      break;
    }
    case EditKind::edit_qa: {
      QAItem& qa = qa_target(rec, op.target_id);
      set_qa_fields(qa, op.payload);
      qa.status = QAStatus::unverified;
      break;
    }
    case EditKind::verify_qa: {
      require_active(v, op.target_id, op.op);
      QAItem& qa = qa_target(rec, op.target_id);
      if (qa.question_text.empty()) {
        throw Error(ErrorCode::InvalidTarget, "cannot verify a QA item without a question");
      }
      qa.status = QAStatus::verified;
      break;
    }
    case EditKind::flag_qa: {
      require_active(v, op.target_id, op.op);
      QAItem& qa = qa_target(rec, op.target_id);
      std::string note = str_field(op.payload, "note");
      if (note.empty()) throw Error(ErrorCode::InvalidTarget, "flag_qa needs a note");
      qa.status = QAStatus::flagged;
      qa.note = std::move(note);
      break;
    }
    case EditKind::set_no_evidence: {
      require_active(v, op.target_id, op.op);
      qa_target(rec, op.target_id);
      auto it = op.payload.find("value");
      const bool value = it == op.payload.end() || (it->is_boolean() && it->get<bool>());
      v.no_evidence = value;
      if (value) v.evidence.clear();
      break;
    }
  }

  if (op.op == EditKind::flag_qa) {
    v.state = SessionState::flagged;
  } else if (v.state == SessionState::flagged) {
    const bool resolves = (op.op == EditKind::verify_qa || op.op == EditKind::edit_qa) &&
                          op.target_id == v.active_qa;
    if (resolves) v.state = SessionState::in_review;
  } else {
    v.state = SessionState::in_review;
  }
}

}  // namespace

std::string_view to_string(EditKind kind) {
  for (const auto& [k, name] : kEditNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<EditKind> edit_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kEditNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

Json edit_to_json(const EditOp& op) {
  return Json{{"op", to_string(op.op)},
              {"target_id", op.target_id},
              {"payload", op.payload},
              {"timestamp", op.timestamp},
              {"actor", op.actor}};
}

EditOp edit_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "edit op must be an object");
  EditOp op;
  const auto kind = edit_kind_from_string(j.value("op", ""));
  if (!kind) throw Error(ErrorCode::ParseError, "unknown edit op: " + j.value("op", ""));
  op.op = *kind;
  try {
    op.target_id = j.value("target_id", "");
    op.payload = j.value("payload", Json::object());
    op.timestamp = j.value("timestamp", std::uint64_t{0});
    op.actor = j.value("actor", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad edit op: ") + e.what());
  }
  if (!op.payload.is_object()) throw Error(ErrorCode::ParseError, "payload must be an object");
  return op;
}

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::loaded: return "loaded";
    case SessionState::proposed: return "proposed";
    case SessionState::in_review: return "in_review";
    case SessionState::flagged: return "flagged";
    case SessionState::finalized: return "finalized";
  }
  return "unknown";
}

Json snapshot_to_json(const ProposalSnapshot& s) {
  return Json{{"mode", to_string(s.mode)}, {"response", response_to_wire(s.response)}};
}

ProposalSnapshot snapshot_from_json(const Json& j) {
  ProposalSnapshot s;
  const auto mode = proposal_mode_from_string(j.value("mode", ""));
  if (!mode) throw Error(ErrorCode::ParseError, "snapshot has no valid mode");
  s.mode = *mode;
  s.response = response_from_wire(j.value("response", Json::object()));
  return s;
}

bool SessionView::in_evidence(std::string_view id) const { return contains(evidence, id); }
bool SessionView::is_proposed(std::string_view id) const { return contains(proposed, id); }

Json view_to_json(const SessionView& v) {
  Json geometry = Json::object();
  for (const auto& id : v.proposed) {
    if (auto it = v.proposed_geometry.find(id); it != v.proposed_geometry.end()) {
      geometry[id] = bbox_to_json(it->second);
    }
  }
  return Json{{"state", to_string(v.state)},
              {"active_qa", v.active_qa},
              {"mode", v.mode ? Json(to_string(*v.mode)) : Json(nullptr)},
              {"proposed", v.proposed},
              {"proposed_geometry", std::move(geometry)},
              {"evidence", v.evidence},
              {"no_evidence", v.no_evidence},
              {"last_timestamp", v.last_timestamp},
              {"record", record_to_json(v.record)}};
}

UtilityCounts classify(const SessionView& v, double retain_iou) {
  UtilityCounts c;
  for (const auto& id : v.proposed) {
    const Region* r = v.record.find_region(id);
    const bool kept = r != nullptr && !r->deleted && v.in_evidence(id);
    const auto geo = v.proposed_geometry.find(id);
    if (kept && geo != v.proposed_geometry.end() && iou(r->bbox, geo->second) >= retain_iou) {
      ++c.retained_pred_count;
    } else {
      ++c.effective_removed_count;
      if (kept) ++c.new_drawn_count;  // heavy edit: removed and redrawn
    }
  }
  for (const auto& id : v.evidence) {
    if (v.is_proposed(id)) continue;
    const Region* r = v.record.find_region(id);
    if (r != nullptr && r->provenance.source == Source::reviewer_added) {
      ++c.new_drawn_count;
    } else {
      ++c.added_gt_count;
    }
  }
  return c;
}

SessionView initial_view(const ImageRecord& record, const std::string& active_qa) {
  SessionView v;
  v.record = record;
  v.active_qa = active_qa;
  return v;
}

void apply_proposal(SessionView& view, const ProposalSnapshot& snapshot) {
  if (view.state != SessionState::loaded) {
    throw Error(ErrorCode::AlreadyProposed, "session already has a proposal");
  }
  SessionView v = view;
  ImageRecord& rec = v.record;
  const auto& resp = snapshot.response;

  auto add_generated = [&](const GeneratedRegion& g) {
    if (!is_well_formed(g.bbox)) {
      throw Error(ErrorCode::GeometryError, "generated region is degenerate");
    }
    Region r;
    r.region_id = next_region_id(rec);
    r.bbox = g.bbox;
    r.label = g.label;
    r.provenance = {Source::model_generated, false};
    rec.regions.push_back(r);
    return r.region_id;
  };

  switch (snapshot.mode) {
    case ProposalMode::selection:
      for (const auto& id : resp.selected_ids) {
        const Region* r = rec.find_region(id);
        const bool candidate = r != nullptr && !r->deleted &&
                               (r->provenance.source == Source::ground_truth ||
                                r->provenance.source == Source::predicted);
        if (!candidate) throw Error(ErrorCode::InvalidTarget, "selected id is no candidate: " + id);
        if (!contains(v.proposed, id)) v.proposed.push_back(id);
      }
      break;
    case ProposalMode::region_generation:
      for (const auto& g : resp.generated_regions) v.proposed.push_back(add_generated(g));
      break;
    case ProposalMode::qa_and_region_generation: {
      if (!rec.qa_items.empty()) {
        throw Error(ErrorCode::InvalidTarget, "QA generation needs a record without QA items");
      }
      std::vector<std::string> ids;
      for (const auto& g : resp.generated_regions) ids.push_back(add_generated(g));
      for (const auto& gq : resp.generated_qa) {
        QAItem qa;
        qa.qa_id = next_qa_id(rec);
        qa.question_text = gq.qa.question_text;
        qa.answer_text = gq.qa.answer_text;
        qa.choices = gq.qa.choices;
        AttributionMapping att{qa.qa_id, {}, false};
        for (std::size_t index : gq.evidence) {
          if (index >= ids.size()) {
            throw Error(ErrorCode::InvalidTarget, "QA evidence index out of range");
          }
          if (!contains(att.evidence, ids[index])) att.evidence.push_back(ids[index]);
        }
        if (rec.qa_items.empty()) {
          v.active_qa = qa.qa_id;
          v.proposed = att.evidence;
        }
        rec.qa_items.push_back(std::move(qa));
        rec.attributions.push_back(std::move(att));
      }
      break;
    }
  }

  for (const auto& id : v.proposed) v.proposed_geometry[id] = rec.find_region(id)->bbox;
  v.evidence = v.proposed;
  v.mode = snapshot.mode;
  v.state = SessionState::proposed;
  view = std::move(v);
}

void apply_op(SessionView& view, EditOp& op) {
  if (view.state == SessionState::loaded) {
    throw Error(ErrorCode::IllegalInState, "no proposal attached yet");
  }
  if (view.state == SessionState::finalized) {
    throw Error(ErrorCode::IllegalInState, "session is finalized");
  }
  if (op.timestamp != 0 && op.timestamp <= view.last_timestamp) {
    throw Error(ErrorCode::CorruptLog, "timestamps must strictly increase");
  }
  SessionView v = view;
  EditOp applied = op;
  if (applied.timestamp == 0) applied.timestamp = view.last_timestamp + 1;
  mutate(v, applied);
  v.last_timestamp = applied.timestamp;
  view = std::move(v);
  op = std::move(applied);
}

SessionView replay(const ImageRecord& record, const std::string& active_qa,
                   const std::optional<ProposalSnapshot>& snapshot,
                   const std::vector<EditOp>& edit_log) {
  SessionView v = initial_view(record, active_qa);
  if (!snapshot) {
    if (!edit_log.empty()) throw Error(ErrorCode::CorruptLog, "edits without a proposal");
    return v;
  }
  try {
    apply_proposal(v, *snapshot);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptLog, std::string("proposal no longer applies: ") + e.what());
  }
  for (std::size_t i = 0; i < edit_log.size(); ++i) {
    EditOp op = edit_log[i];
    if (op.timestamp == 0) {
      throw Error(ErrorCode::CorruptLog, "logged op " + std::to_string(i) + " has no timestamp");
    }
    try {
      apply_op(v, op);
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptLog, "logged op " + std::to_string(i) + ": " + e.what());
    }
    if (!(op == edit_log[i])) {
      throw Error(ErrorCode::CorruptLog, "logged op " + std::to_string(i) + " is incomplete");
    }
  }
  return v;
}

Json final_to_json(const FinalResult& r) {
  const auto& c = r.counts;
  return Json{{"qa_id", r.attribution.qa_id},
              {"evidence", r.attribution.evidence},
              {"no_evidence", r.attribution.no_evidence},
              {"retain_iou", r.retain_iou},
              {"counts", Json{{"retained_pred_count", c.retained_pred_count},
                              {"effective_removed_count", c.effective_removed_count},
                              {"added_gt_count", c.added_gt_count},
                              {"new_drawn_count", c.new_drawn_count}}}};
}

FinalResult final_from_json(const Json& j) {
  try {
    FinalResult r;
    r.attribution.qa_id = j.at("qa_id").get<std::string>();
    r.attribution.evidence = j.at("evidence").get<std::vector<std::string>>();
    r.attribution.no_evidence = j.value("no_evidence", false);
    r.retain_iou = j.value("retain_iou", kDefaultRetainIou);
    const auto& c = j.at("counts");
    r.counts.retained_pred_count = c.at("retained_pred_count").get<std::uint64_t>();
    r.counts.effective_removed_count = c.at("effective_removed_count").get<std::uint64_t>();
    r.counts.added_gt_count = c.at("added_gt_count").get<std::uint64_t>();
    r.counts.new_drawn_count = c.at("new_drawn_count").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad final result: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// ReviewSession

ReviewSession::ReviewSession(ImageRecord base, std::string qa_id)
    : base_(std::move(base)), qa_id_(std::move(qa_id)), view_(initial_view(base_, qa_id_)) {}

ReviewSession ReviewSession::open(ImageRecord record, std::string qa_id) {
  const auto report = validate_record(record);
  if (has_errors(report)) {
    std::string msg = "record " + record.image_uid + " is invalid";
    for (const auto& v : report) {
      if (v.severity == Severity::error) msg += "; " + v.path + ": " + v.message;
    }
    throw Error(ErrorCode::InvalidRecord, msg);
  }
  if (record.qa_items.empty()) {
    if (!qa_id.empty() && qa_id != "q_0") {
      throw Error(ErrorCode::UnknownQA, "record has no QA items; use q_0");
    }
    qa_id = "q_0";
  } else if (record.find_qa(qa_id) == nullptr) {
    throw Error(ErrorCode::UnknownQA, "unknown QA " + qa_id + " in " + record.image_uid);
  }
  return ReviewSession(std::move(record), std::move(qa_id));
}

ReviewSession ReviewSession::restore(ImageRecord base, std::string qa_id,
                                     std::optional<ProposalSnapshot> snapshot,
                                     std::vector<EditOp> edit_log,
                                     std::vector<FailureEvent> failures,
                                     std::optional<FinalResult> final_result) {
  ReviewSession s(std::move(base), std::move(qa_id));
  s.view_ = replay(s.base_, s.qa_id_, snapshot, edit_log);
  s.snapshot_ = std::move(snapshot);
  s.log_ = std::move(edit_log);
  s.failures_ = std::move(failures);
  if (final_result) {
    try {
      s.finalize(final_result->retain_iou);
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptLog, std::string("stored final state no longer holds: ") +
                                             e.what());
    }
    if (!(*s.final_ == *final_result)) {
      throw Error(ErrorCode::CorruptLog, "stored final state disagrees with the edit log");
    }
  }
  return s;
}

ProposalMode ReviewSession::proposal_mode() const {
  return choose_mode(base_, base_.find_qa(qa_id_));
}

ProposalRequest ReviewSession::proposal_request(ImagePayload image) const {
  return build_request(base_, base_.find_qa(qa_id_), proposal_mode(), std::move(image));
}

void ReviewSession::attach_proposal(ProposalSnapshot snapshot) {
  apply_proposal(view_, snapshot);
  snapshot_ = std::move(snapshot);
}

void ReviewSession::propose(ProposalBackend& backend, ImagePayload image) {
  if (view_.state != SessionState::loaded) {
    throw Error(ErrorCode::AlreadyProposed, "session already has a proposal");
  }
  const ProposalRequest request = proposal_request(std::move(image));
  check_request(request);
  ProposalResponse response;
  try {
    response = evrev::propose(request, backend);
  } catch (const Error& e) {
    failures_.push_back({std::string(error_code_name(e.code())), e.what(), view_.last_timestamp});
    throw;
  }
  attach_proposal({request.mode, std::move(response)});
}

const EditOp& ReviewSession::apply_edit(EditOp op) {
  apply_op(view_, op);
  log_.push_back(std::move(op));
  return log_.back();
}

const FinalResult& ReviewSession::finalize(double retain_iou) {
  if (view_.state == SessionState::finalized) {
    throw Error(ErrorCode::IllegalInState, "session is already finalized");
  }
  if (view_.state != SessionState::in_review) {
    throw Error(ErrorCode::NotReviewed, "session is " + std::string(to_string(view_.state)) +
                                            "; finalize needs in_review");
  }
  const QAItem* qa = view_.record.find_qa(view_.active_qa);
  if (qa == nullptr) {
    throw Error(ErrorCode::UnknownQA, "active QA " + view_.active_qa + " does not exist");
  }
  if (!view_.no_evidence) {
    if (qa->status != QAStatus::verified) {
      throw Error(ErrorCode::UnverifiedQA, "QA " + qa->qa_id + " is not verified");
    }
    if (view_.evidence.empty()) {
      throw Error(ErrorCode::UnverifiedQA,
                  "verified QA has no evidence; select regions or set no_evidence");
    }
  }

  FinalResult result;
  result.attribution = {view_.active_qa, view_.evidence, view_.no_evidence};
  result.counts = classify(view_, retain_iou);
  result.retain_iou = retain_iou;

  SessionView v = view_;
  if (AttributionMapping* att = v.record.find_attribution(v.active_qa)) {
    att->evidence = v.evidence;
    att->no_evidence = v.no_evidence;
  } else {
    v.record.attributions.push_back({v.active_qa, v.evidence, v.no_evidence});
  }
  v.state = SessionState::finalized;
  view_ = std::move(v);
  final_ = std::move(result);
  return *final_;
}

// ---------------------------------------------------------------------------
// Persistence

Json session_snapshot_document(const ReviewSession& s) {
  Json failures = Json::array();
  for (const auto& f : s.failures()) {
    failures.push_back(
        Json{{"code", f.code}, {"message", f.message}, {"after_timestamp", f.after_timestamp}});
  }
  return Json{{"format", kSessionFormat},
              {"image_uid", s.image_uid()},
              {"qa_id", s.qa_id()},
              {"dataset_type", s.base_record().dataset_type()},
              {"state", to_string(s.state())},
              {"record", record_to_json(s.base_record())},
              {"proposal", s.snapshot() ? snapshot_to_json(*s.snapshot()) : Json(nullptr)},
              {"failures", std::move(failures)},
              {"final", s.final_result() ? final_to_json(*s.final_result()) : Json(nullptr)}};
}

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path SessionStore::snapshot_path(const std::string& uid,
                                                  const std::string& qa) const {
  return dir_ / (uid + "__" + qa + ".snapshot.json");
}

std::filesystem::path SessionStore::log_path(const std::string& uid, const std::string& qa) const {
  return dir_ / (uid + "__" + qa + ".log.jsonl");
}

bool SessionStore::exists(const std::string& uid, const std::string& qa) const {
  return std::filesystem::exists(snapshot_path(uid, qa));
}

void SessionStore::save_snapshot(const ReviewSession& s) const {
  std::filesystem::create_directories(dir_);
  write_text_file_atomic(snapshot_path(s.image_uid(), s.qa_id()),
                         canonical_dump(session_snapshot_document(s)));
  const auto log = log_path(s.image_uid(), s.qa_id());
  if (s.edit_log().empty() && !std::filesystem::exists(log)) {
    write_text_file_atomic(log, "");
  }
}

void SessionStore::append_edit(const ReviewSession& s, const EditOp& op) const {
  std::filesystem::create_directories(dir_);
  const auto path = log_path(s.image_uid(), s.qa_id());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  out << canonical_dump_line(edit_to_json(op)) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

ReviewSession SessionStore::load(const std::string& uid, const std::string& qa) const {
  const auto path = snapshot_path(uid, qa);
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::NotFound, "no session " + uid + "__" + qa);
  }
  return load_file(path);
}

ReviewSession SessionStore::load_file(const std::filesystem::path& snapshot_file) const {
  const Json doc = parse_json_file(snapshot_file);
  if (doc.value("format", "") != kSessionFormat) {
    throw Error(ErrorCode::ParseError, snapshot_file.string() + " is not a session snapshot");
  }
  const std::string uid = doc.value("image_uid", "");
  const std::string qa = doc.value("qa_id", "");
  ImageRecord base = record_from_json(doc.at("record"));

  std::optional<ProposalSnapshot> snapshot;
  if (const auto& p = doc.value("proposal", Json(nullptr)); !p.is_null()) {
    snapshot = snapshot_from_json(p);
  }
  std::vector<FailureEvent> failures;
  for (const auto& f : doc.value("failures", Json::array())) {
    failures.push_back(
        {f.value("code", ""), f.value("message", ""), f.value("after_timestamp", std::uint64_t{0})});
  }
  std::optional<FinalResult> final_result;
  if (const auto& f = doc.value("final", Json(nullptr)); !f.is_null()) {
    final_result = final_from_json(f);
  }

  std::vector<EditOp> log;
  std::filesystem::path log_file = snapshot_file;
  log_file.replace_filename(uid + "__" + qa + ".log.jsonl");
  if (std::filesystem::exists(log_file)) {
    const std::string text = read_text_file(log_file);
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      ++line_no;
      const std::string_view line(text.data() + start, end - start);
      start = end + 1;
      if (line.empty()) continue;
      const Json j = Json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        throw Error(ErrorCode::CorruptLog,
                    log_file.string() + ":" + std::to_string(line_no) + " is not JSON");
      }
      log.push_back(edit_from_json(j));
    }
  }
  return ReviewSession::restore(std::move(base), qa, std::move(snapshot), std::move(log),
                                std::move(failures), std::move(final_result));
}

std::vector<std::filesystem::path> SessionStore::list() const {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir_)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 14 && name.ends_with(".snapshot.json")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace evrev
