// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/workspace.hpp"

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"
#include "evrev/ingest.hpp"

#include <algorithm>

namespace evrev {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kRecordsFormat = "evrev.records.v1";

std::string session_key(const std::string& uid, const std::string& qa) {
  return uid + "__" + qa;
}

UtilityCounts counts_from_json(const Json& c) {
  try {
    UtilityCounts out;
    out.retained_pred_count = c.at("retained_pred_count").get<std::uint64_t>();
    out.effective_removed_count = c.at("effective_removed_count").get<std::uint64_t>();
    out.added_gt_count = c.at("added_gt_count").get<std::uint64_t>();
    out.new_drawn_count = c.at("new_drawn_count").get<std::uint64_t>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad counts object: ") + e.what());
  }
}

// Sessions with no QA items are keyed q_0 before the proposal exists.
std::string normalize_qa(const ImageRecord& record, const std::string& qa) {
  return record.qa_items.empty() && qa.empty() ? "q_0" : qa;
}

}  // namespace

std::vector<std::pair<std::string, UtilityCounts>> collect_session_counts(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.ends_with(".snapshot.json") || name.ends_with(".counts.json")) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<std::pair<std::string, UtilityCounts>> out;
  SessionStore store(dir);
  for (const auto& f : files) {
    if (f.filename().string().ends_with(".counts.json")) {
      const Json doc = parse_json_file(f);
      const Json entries = doc.is_array() ? doc : Json::array({doc});
      for (const auto& e : entries) {
        if (!e.is_object() || !e.contains("counts")) {
          throw Error(ErrorCode::ParseError, f.string() + ": entries need a counts object");
        }
        out.emplace_back(e.value("dataset_type", "unknown"), counts_from_json(e["counts"]));
      }
      continue;
    }
    ReviewSession s = store.load_file(f);
    if (s.final_result()) {
      out.emplace_back(s.base_record().dataset_type(), s.final_result()->counts);
    }
  }
  return out;
}

LabelSet load_label_files(const std::vector<fs::path>& files) {
  if (files.empty()) throw Error(ErrorCode::InputError, "no labels file given");
  if (files.size() == 1) return load_labels_csv(files.front());
  LabelSet merged;
  for (std::size_t i = 0; i < files.size(); ++i) {
    LabelSet one = load_labels_csv(files[i]);
    for (auto& l : one.labels) {
      l.annotator_id = "rater" + std::to_string(i + 1);
    }
    // Within one file the rater is fixed, so repeated instances are duplicates.
    std::vector<std::tuple<std::string, int, std::string>> seen;
    for (const auto& l : one.labels) {
      auto key = std::make_tuple(l.instance_id, static_cast<int>(l.criterion), l.dataset);
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
        throw Error(ErrorCode::DuplicateLabel,
                    files[i].string() + ": instance " + l.instance_id + " labeled twice");
      }
      seen.push_back(std::move(key));
    }
    merged.labels.insert(merged.labels.end(), one.labels.begin(), one.labels.end());
  }
  return merged;
}

Json session_to_json(const ReviewSession& s) {
  Json log = Json::array();
  for (const auto& op : s.edit_log()) log.push_back(edit_to_json(op));
  Json failures = Json::array();
  for (const auto& f : s.failures()) {
    failures.push_back(
        Json{{"code", f.code}, {"message", f.message}, {"after_timestamp", f.after_timestamp}});
  }
  return Json{{"image_uid", s.image_uid()},
              {"qa_id", s.qa_id()},
              {"state", to_string(s.state())},
              {"dataset_type", s.base_record().dataset_type()},
              {"proposal", s.snapshot() ? snapshot_to_json(*s.snapshot()) : Json(nullptr)},
              {"view", view_to_json(s.view())},
              {"edit_log", std::move(log)},
              {"failures", std::move(failures)},
              {"final", s.final_result() ? final_to_json(*s.final_result()) : Json(nullptr)}};
}

Workspace::Workspace(WorkspaceConfig config)
    : config_(std::move(config)), store_(config_.data_dir / "sessions") {
  if (!(config_.retain_iou >= 0.0 && config_.retain_iou <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "retain IoU must lie in [0, 1]");
  }
  if (config_.backend != "mock" && config_.backend != "http") {
    throw Error(ErrorCode::BadConfig, "backend must be mock or http, not " + config_.backend);
  }
  if (config_.backend_concurrency < 1) {
    throw Error(ErrorCode::BadConfig, "backend concurrency must be at least 1");
  }
  const fs::path records = config_.data_dir / "records.json";
  if (fs::exists(records)) {
    const Json doc = parse_json_file(records);
    if (doc.value("format", "") != kRecordsFormat) {
      throw Error(ErrorCode::ParseError, records.string() + " is not a records store");
    }
    for (const auto& e : doc.value("records", Json::array())) {
      records_.push_back({record_from_json(e.at("record")), e.value("base_dir", "")});
    }
  }
}

std::vector<std::string> Workspace::ingest(const fs::path& dataset) {
  auto adapted = ingest_file(dataset);
  const fs::path base = fs::absolute(dataset).parent_path();
  std::vector<std::string> uids;
  std::lock_guard lock(records_mu_);
  for (auto& r : adapted) {
    uids.push_back(r.image_uid);
    auto it = std::find_if(records_.begin(), records_.end(), [&](const StoredRecord& s) {
      return s.record.image_uid == r.image_uid;
    });
    if (it != records_.end()) {
      *it = {std::move(r), base};
    } else {
      records_.push_back({std::move(r), base});
    }
  }
  save_records();
  return uids;
}

void Workspace::save_records() const {
  Json list = Json::array();
  for (const auto& s : records_) {
    list.push_back(Json{{"base_dir", s.base_dir.string()}, {"record", record_to_json(s.record)}});
  }
  fs::create_directories(config_.data_dir);
  write_text_file_atomic(config_.data_dir / "records.json",
                         canonical_dump(Json{{"format", kRecordsFormat}, {"records", list}}));
}

std::vector<StoredRecord> Workspace::records() const {
  std::lock_guard lock(records_mu_);
  return records_;
}

StoredRecord Workspace::record(const std::string& uid) const {
  std::lock_guard lock(records_mu_);
  for (const auto& s : records_) {
    if (s.record.image_uid == uid) return s;
  }
  throw Error(ErrorCode::NotFound, "unknown image_uid " + uid);
}

fs::path Workspace::image_path(const StoredRecord& stored) const {
  const fs::path p(stored.record.image_path);
  return p.is_absolute() || stored.base_dir.empty() ? p : stored.base_dir / p;
}

std::mutex& Workspace::session_mutex(const std::string& key) {
  std::lock_guard lock(locks_mu_);
  auto& slot = locks_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

ProposalBackend& Workspace::backend() {
  std::lock_guard lock(backend_mu_);
  if (!backend_) {
    std::shared_ptr<ProposalBackend> inner;
    if (config_.backend == "mock") {
      inner = std::make_shared<MockBackend>(config_.mock_seed);
    } else {
      inner = make_http_backend(config_.http);
    }
    backend_ = std::make_shared<BoundedBackend>(std::move(inner), config_.backend_concurrency);
  }
  return *backend_;
}

Json Workspace::propose(const std::string& uid, const std::string& qa_in) {
  StoredRecord stored = record(uid);
  const std::string qa = normalize_qa(stored.record, qa_in);
  std::lock_guard lock(session_mutex(session_key(uid, qa)));

  const fs::path image_file = image_path(stored);
  ImagePayload image = load_image_payload(image_file);
  std::optional<ReviewSession> session;
  if (store_.exists(uid, qa)) {
    session.emplace(store_.load(uid, qa));
  } else {
    ImageRecord rec = stored.record;
    if (!rec.image_size && !image.bytes.empty()) rec.image_size = probe_image_size(image.bytes);
    session.emplace(ReviewSession::open(std::move(rec), qa));
  }
  if (session->state() != SessionState::loaded) {
    throw Error(ErrorCode::AlreadyProposed, "session " + session_key(uid, qa) + " is " +
                                                std::string(to_string(session->state())));
  }
  try {
    session->propose(backend(), std::move(image));
  } catch (const Error& e) {
    // Keep the failure event; the session itself stays in state loaded.
    if (!session->failures().empty()) store_.save_snapshot(*session);
    throw;
  }
  store_.save_snapshot(*session);
  return session_to_json(*session);
}

Json Workspace::apply_edit(const std::string& uid, const std::string& qa, EditOp op) {
  std::lock_guard lock(session_mutex(session_key(uid, qa)));
  ReviewSession session = load_session(uid, qa);
  const EditOp& applied = session.apply_edit(std::move(op));
  store_.append_edit(session, applied);
  return Json{{"applied", edit_to_json(applied)},
              {"state", to_string(session.state())},
              {"view", view_to_json(session.view())}};
}

Json Workspace::finalize(const std::string& uid, const std::string& qa) {
  std::lock_guard lock(session_mutex(session_key(uid, qa)));
  ReviewSession session = load_session(uid, qa);
  session.finalize(config_.retain_iou);
  store_.save_snapshot(session);
  return session_to_json(session);
}

ReviewSession Workspace::load_session(const std::string& uid, const std::string& qa) const {
  record(uid);  // NotFound for unknown records
  return store_.load(uid, qa);
}

Json Workspace::session(const std::string& uid, const std::string& qa) const {
  return session_to_json(load_session(uid, qa));
}

std::vector<ReviewSession> Workspace::sessions(std::vector<std::string>* errors) const {
  std::vector<ReviewSession> out;
  for (const auto& f : store_.list()) {
    try {
      out.push_back(store_.load_file(f));
    } catch (const Error& e) {
      if (errors == nullptr) throw;
      errors->push_back(f.filename().string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<fs::path> Workspace::export_all(const fs::path& out_dir, bool overlay) const {
  std::vector<fs::path> written;
  for (const auto& s : sessions()) {
    if (s.state() != SessionState::finalized) continue;
    auto paths = write_export(s, out_dir, overlay);
    written.insert(written.end(), paths.begin(), paths.end());
  }
  return written;
}

std::vector<UtilityRow> Workspace::utility() const {
  if (!fs::is_directory(sessions_dir())) return utility_table({});
  return utility_table(collect_session_counts(sessions_dir()));
}

}  // namespace evrev
