// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/meta_schema.hpp"

#include "evrev/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace evrev {

double iou(const BBox& a, const BBox& b) {
  if (a.w <= 0 || a.h <= 0 || b.w <= 0 || b.h <= 0) {
    return 0.0;
  }
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) {
    return 0.0;
  }
  if (a == b) {
    return 1.0;
  }
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clip_to(const BBox& box, const ImageSize& size) {
  const double x0 = std::clamp(box.x, 0.0, size.width);
  const double y0 = std::clamp(box.y, 0.0, size.height);
  const double x1 = std::clamp(box.right(), 0.0, size.width);
  const double y1 = std::clamp(box.bottom(), 0.0, size.height);
  return BBox{x0, y0, x1 - x0, y1 - y0};
}

bool is_well_formed(const BBox& box) {
  return std::isfinite(box.x) && std::isfinite(box.y) && std::isfinite(box.w) &&
         std::isfinite(box.h) && box.w > 0 && box.h > 0 && box.x >= 0 && box.y >= 0;
}

std::string_view to_string(Source source) {
  switch (source) {
    case Source::ground_truth: return "ground_truth";
    case Source::predicted: return "predicted";
    case Source::model_selected: return "model_selected";
    case Source::model_generated: return "model_generated";
    case Source::reviewer_added: return "reviewer_added";
  }
  return "ground_truth";
}

std::optional<Source> source_from_string(std::string_view text) {
  for (Source s : {Source::ground_truth, Source::predicted, Source::model_selected,
                   Source::model_generated, Source::reviewer_added}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view export_source_string(Source source) {
  switch (source) {
    case Source::ground_truth: return "ground_truth";
    case Source::predicted: return "predicted";
    case Source::model_selected: return "selected";
    case Source::model_generated: return "generated";
    case Source::reviewer_added: return "added";
  }
  return "ground_truth";
}

std::optional<Source> source_from_any_string(std::string_view text) {
  if (auto s = source_from_string(text)) return s;
  for (Source s : {Source::ground_truth, Source::predicted, Source::model_selected,
                   Source::model_generated, Source::reviewer_added}) {
    if (export_source_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(QAStatus status) {
  switch (status) {
    case QAStatus::unverified: return "unverified";
    case QAStatus::verified: return "verified";
    case QAStatus::flagged: return "flagged";
  }
  return "unverified";
}

std::optional<QAStatus> qa_status_from_string(std::string_view text) {
  for (QAStatus s : {QAStatus::unverified, QAStatus::verified, QAStatus::flagged}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

const Region* ImageRecord::find_region(std::string_view id) const {
  auto it = std::find_if(regions.begin(), regions.end(),
                         [&](const Region& r) { return r.region_id == id; });
  return it == regions.end() ? nullptr : &*it;
}

Region* ImageRecord::find_region(std::string_view id) {
  return const_cast<Region*>(std::as_const(*this).find_region(id));
}

const QAItem* ImageRecord::find_qa(std::string_view id) const {
  auto it = std::find_if(qa_items.begin(), qa_items.end(),
                         [&](const QAItem& q) { return q.qa_id == id; });
  return it == qa_items.end() ? nullptr : &*it;
}

QAItem* ImageRecord::find_qa(std::string_view id) {
  return const_cast<QAItem*>(std::as_const(*this).find_qa(id));
}

const AttributionMapping* ImageRecord::find_attribution(std::string_view qa_id) const {
  auto it = std::find_if(attributions.begin(), attributions.end(),
                         [&](const AttributionMapping& a) { return a.qa_id == qa_id; });
  return it == attributions.end() ? nullptr : &*it;
}

AttributionMapping* ImageRecord::find_attribution(std::string_view qa_id) {
  return const_cast<AttributionMapping*>(std::as_const(*this).find_attribution(qa_id));
}

std::string ImageRecord::dataset_type() const {
  if (auto it = source_metadata.find("dataset_type");
      it != source_metadata.end() && it->is_string() && !it->get<std::string>().empty()) {
    return it->get<std::string>();
  }
  return adapter;
}

namespace {

std::optional<long long> numeric_suffix(std::string_view id, std::string_view prefix) {
  if (!id.starts_with(prefix) || id.size() == prefix.size()) {
    return std::nullopt;
  }
  const auto digits = id.substr(prefix.size());
  if (digits.front() == '0' ||
      !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  long long value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    return std::nullopt;
  }
  return value;
}

std::string idx(std::string_view field, std::size_t i) {
  return std::string(field) + "[" + std::to_string(i) + "]";
}

void check_bbox(const BBox& b, const ImageSize* size, const std::string& path,
                ValidationReport& out) {
  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) || !std::isfinite(b.h)) {
    out.push_back({path, "non-finite coordinate"});
    return;
  }
  if (b.w <= 0) out.push_back({path + ".w", "width must be positive"});
  if (b.h <= 0) out.push_back({path + ".h", "height must be positive"});
  if (b.x < 0) out.push_back({path + ".x", "x must be non-negative"});
  if (b.y < 0) out.push_back({path + ".y", "y must be non-negative"});
  if (size) {
    if (b.right() > size->width + kBoundsTolerancePx) {
      out.push_back({path + ".w", "box extends past the right image edge"});
    }
    if (b.bottom() > size->height + kBoundsTolerancePx) {
      out.push_back({path + ".h", "box extends past the bottom image edge"});
    }
  }
}

}  // namespace

bool is_export_region_id(std::string_view id) {
  return numeric_suffix(id, "a_").has_value();
}

std::string next_region_id(const ImageRecord& record) {
  long long max_id = 0;
  for (const auto& r : record.regions) {
    if (auto n = numeric_suffix(r.region_id, "a_")) max_id = std::max(max_id, *n);
  }
  return "a_" + std::to_string(max_id + 1);
}

std::string next_qa_id(const ImageRecord& record) {
  long long next = 0;
  for (const auto& q : record.qa_items) {
    if (q.qa_id == "q_0") next = std::max(next, 1LL);
    if (auto n = numeric_suffix(q.qa_id, "q_")) next = std::max(next, *n + 1);
  }
  return "q_" + std::to_string(next);
}

ValidationReport validate_record(const ImageRecord& record) {
  ValidationReport out;
  if (record.image_uid.empty()) {
    out.push_back({"image_uid", "must be non-empty"});
  }
  if (record.image_size &&
      !(record.image_size->width > 0 && record.image_size->height > 0 &&
        std::isfinite(record.image_size->width) && std::isfinite(record.image_size->height))) {
    out.push_back({"image_size", "dimensions must be positive"});
  }
  const ImageSize* size =
      record.image_size && record.image_size->width > 0 && record.image_size->height > 0
          ? &*record.image_size
          : nullptr;

  if (auto it = record.source_metadata.find("coords");
      it != record.source_metadata.end() && *it == "fractional") {
    out.push_back({"source_metadata.coords",
                   "fractional coordinates retained; image size unknown", Severity::warning});
  }

  std::set<std::string> region_ids;
  for (std::size_t i = 0; i < record.regions.size(); ++i) {
    const auto& r = record.regions[i];
    const auto base = idx("regions", i);
    if (!is_export_region_id(r.region_id)) {
      out.push_back({base + ".region_id", "must match a_<positive integer>"});
    }
    if (!region_ids.insert(r.region_id).second) {
      out.push_back({base + ".region_id", "duplicate region id"});
    }
    check_bbox(r.bbox, size, base + ".bbox", out);
  }

  std::set<std::string> qa_ids;
  for (std::size_t i = 0; i < record.qa_items.size(); ++i) {
    const auto& q = record.qa_items[i];
    const auto base = idx("qa_items", i);
    if (q.qa_id.empty()) {
      out.push_back({base + ".qa_id", "must be non-empty"});
    } else if (!qa_ids.insert(q.qa_id).second) {
      out.push_back({base + ".qa_id", "duplicate qa id"});
    }
    if (q.status == QAStatus::verified && q.question_text.empty()) {
      out.push_back({base + ".question_text", "verified QA needs a question"});
    }
    if (q.status == QAStatus::flagged && q.note.empty()) {
      out.push_back({base + ".note", "flagged QA needs a reviewer note"});
    }
  }

  std::set<std::string> mapped;
  for (std::size_t i = 0; i < record.attributions.size(); ++i) {
    const auto& a = record.attributions[i];
    const auto base = idx("attributions", i);
    if (!qa_ids.contains(a.qa_id)) {
      out.push_back({base + ".qa_id", "references unknown qa id"});
    }
    if (!mapped.insert(a.qa_id).second) {
      out.push_back({base + ".qa_id", "duplicate attribution for qa"});
    }
    std::set<std::string> seen;
    for (const auto& id : a.evidence) {
      const Region* r = record.find_region(id);
      if (r == nullptr) {
        out.push_back({base + ".evidence", "references unknown region " + id});
      } else if (r->deleted) {
        out.push_back({base + ".evidence", "references deleted region " + id});
      }
      if (!seen.insert(id).second) {
        out.push_back({base + ".evidence", "duplicate region " + id});
      }
    }
  }
  return out;
}

bool has_errors(const ValidationReport& report) {
  return std::any_of(report.begin(), report.end(),
                     [](const Violation& v) { return v.severity == Severity::error; });
}

Json bbox_to_json(const BBox& box) {
  return Json::array({box.x, box.y, box.w, box.h});
}

BBox bbox_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4 ||
      !std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_number(); })) {
    throw Error(ErrorCode::ParseError, "bbox must be an array of four numbers");
  }
  return BBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Json record_to_json(const ImageRecord& record) {
  Json doc = Json::object();
  doc["image_uid"] = record.image_uid;
  doc["image_path"] = record.image_path;
  doc["image_size"] = record.image_size
                          ? Json::array({record.image_size->width, record.image_size->height})
                          : Json(nullptr);
  doc["adapter"] = record.adapter;

  Json qas = Json::array();
  for (const auto& q : record.qa_items) {
    Json jq = Json::object();
    jq["qa_id"] = q.qa_id;
    jq["question_text"] = q.question_text;
    jq["answer_text"] = q.answer_text;
    jq["choices"] = q.choices;
    jq["status"] = to_string(q.status);
    jq["note"] = q.note;
    qas.push_back(std::move(jq));
  }
  doc["qa_items"] = std::move(qas);

  Json regions = Json::array();
  for (const auto& r : record.regions) {
    Json jr = Json::object();
    jr["region_id"] = r.region_id;
    jr["bbox"] = bbox_to_json(r.bbox);
    jr["label"] = r.label ? Json(*r.label) : Json(nullptr);
    jr["source"] = to_string(r.provenance.source);
    jr["edited"] = r.provenance.edited;
    jr["source_id"] = r.source_id ? Json(*r.source_id) : Json(nullptr);
    jr["deleted"] = r.deleted;
    regions.push_back(std::move(jr));
  }
  doc["regions"] = std::move(regions);

  Json attributions = Json::array();
  for (const auto& a : record.attributions) {
    Json ja = Json::object();
    ja["qa_id"] = a.qa_id;
    ja["evidence"] = a.evidence;
    ja["no_evidence"] = a.no_evidence;
    attributions.push_back(std::move(ja));
  }
  doc["attributions"] = std::move(attributions);
  doc["source_metadata"] = record.source_metadata;
  return doc;
}

ImageRecord record_from_json(const Json& j) {
  try {
    ImageRecord r;
    r.image_uid = j.at("image_uid").get<std::string>();
    r.image_path = j.at("image_path").get<std::string>();
    if (const auto& s = j.at("image_size"); !s.is_null()) {
      r.image_size = ImageSize{s.at(0).get<double>(), s.at(1).get<double>()};
    }
    r.adapter = j.value("adapter", "");
    for (const auto& jq : j.at("qa_items")) {
      QAItem q;
      q.qa_id = jq.at("qa_id").get<std::string>();
      q.question_text = jq.at("question_text").get<std::string>();
      q.answer_text = jq.at("answer_text").get<std::string>();
      q.choices = jq.at("choices").get<std::vector<std::string>>();
      q.status = qa_status_from_string(jq.at("status").get<std::string>())
                     .value_or(QAStatus::unverified);
      q.note = jq.value("note", "");
      r.qa_items.push_back(std::move(q));
    }
    for (const auto& jr : j.at("regions")) {
      Region reg;
      reg.region_id = jr.at("region_id").get<std::string>();
      reg.bbox = bbox_from_json(jr.at("bbox"));
      if (const auto& l = jr.at("label"); !l.is_null()) reg.label = l.get<std::string>();
      auto src = source_from_string(jr.at("source").get<std::string>());
      if (!src) throw Error(ErrorCode::ParseError, "unknown region source");
      reg.provenance = Provenance{*src, jr.value("edited", false)};
      if (auto it = jr.find("source_id"); it != jr.end() && !it->is_null()) {
        reg.source_id = it->get<std::string>();
      }
      reg.deleted = jr.value("deleted", false);
      r.regions.push_back(std::move(reg));
    }
    for (const auto& ja : j.at("attributions")) {
      AttributionMapping a;
      a.qa_id = ja.at("qa_id").get<std::string>();
      a.evidence = ja.at("evidence").get<std::vector<std::string>>();
      a.no_evidence = ja.value("no_evidence", false);
      r.attributions.push_back(std::move(a));
    }
    r.source_metadata = j.value("source_metadata", Json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed record document: ") + e.what());
  }
}

}  // namespace evrev
