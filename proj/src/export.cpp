// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/export.hpp"

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"

#include <array>
#include <sstream>

namespace evrev {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kLegend{{
    {"ground_truth", "#1f77b4"},
    {"predicted", "#ff7f0e"},
    {"selected", "#2ca02c"},
    {"generated", "#9467bd"},
    {"added", "#d62728"},
}};

void require_final(const ReviewSession& s) {
  if (s.state() != SessionState::finalized) {
    throw Error(ErrorCode::NotFinalized, "session " + s.image_uid() + "__" + s.qa_id() + " is " +
                                             std::string(to_string(s.state())));
  }
}

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

Json metadata_string(const Json& md, const char* key) {
  auto it = md.find(key);
  if (it == md.end() || it->is_null()) return "";
  return *it;
}

Json ltwh(const BBox& b) {
  return Json{{"left", b.x}, {"top", b.y}, {"width", b.w}, {"height", b.h}};
}

}  // namespace

std::string_view source_color(std::string_view export_source) {
  for (const auto& [name, color] : kLegend) {
    if (name == export_source) return color;
  }
  return "#7f7f7f";
}

std::vector<ExportedRegion> final_evidence(const ReviewSession& session) {
  require_final(session);
  const SessionView& v = session.view();
  const bool selection = v.mode == ProposalMode::selection;
  std::vector<ExportedRegion> out;
  for (const auto& id : session.final_result()->attribution.evidence) {
    const Region* r = v.record.find_region(id);
    if (r == nullptr || r->deleted) continue;
    ExportedRegion e;
    e.id = r->region_id;
    e.bbox = r->bbox;
    e.label = r->label.value_or("");
    e.source = selection && v.is_proposed(id) ? "selected"
                                              : std::string(export_source_string(r->provenance.source));
    out.push_back(std::move(e));
  }
  return out;
}

Json export_record(const ReviewSession& session) {
  auto regions = final_evidence(session);
  const SessionView& v = session.view();
  const ImageRecord& rec = v.record;
  const QAItem* qa = rec.find_qa(v.active_qa);

  Json annotations = Json::array();
  for (const auto& e : regions) {
    annotations.push_back(Json{{"id", e.id},
                               {"bbox", Json::array({e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h})},
                               {"label", e.label},
                               {"meta", Json{{"source", e.source}, {"kind", "bbox"}}}});
  }
  const Json& md = rec.source_metadata;
  Json answers = Json::object();
  if (auto it = md.find("answers"); it != md.end() && it->is_object()) answers = *it;
  Json metadata{{"annotation_path", metadata_string(md, "annotation_path")},
                {"ground_truth_path", metadata_string(md, "ground_truth_path")},
                {"answers", std::move(answers)}};
  if (session.final_result()->attribution.no_evidence) metadata["no_visual_evidence"] = true;

  Json choices = Json::array();
  if (qa != nullptr) {
    for (const auto& c : qa->choices) choices.push_back(c);
  }
  return Json{{"dataset_type", rec.dataset_type()},
              {"image", rec.image_path},
              {"qa", Json{{"question", qa ? qa->question_text : std::string()},
                          {"answer", qa ? qa->answer_text : std::string()},
                          {"choices", std::move(choices)}}},
              {"annotations", std::move(annotations)},
              {"metadata", std::move(metadata)}};
}

std::string export_basename(const ReviewSession& session) {
  return session.image_uid() + "__" + session.qa_id();
}

std::string export_overlay(const ImageRecord& record, const std::vector<ExportedRegion>& regions) {
  if (!record.image_size) {
    throw Error(ErrorCode::MissingImageSize,
                "overlay for " + record.image_uid + " needs the image size");
  }
  const std::string w = format_number(record.image_size->width);
  const std::string h = format_number(record.image_size->height);
  const std::string href = xml_escape(record.image_path);
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\""
      << " width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
      << "\">\n"
      << "  <image href=\"" << href << "\" xlink:href=\"" << href << "\" x=\"0\" y=\"0\" width=\""
      << w << "\" height=\"" << h << "\"/>\n"
      << "  <g id=\"evidence\" fill=\"none\" stroke-width=\"2\">\n";
  for (const auto& e : regions) {
    svg << "    <rect x=\"" << format_number(e.bbox.x) << "\" y=\"" << format_number(e.bbox.y)
        << "\" width=\"" << format_number(e.bbox.w) << "\" height=\"" << format_number(e.bbox.h)
        << "\" id=\"" << xml_escape(e.id) << "\" data-source=\"" << xml_escape(e.source)
        << "\" stroke=\"" << source_color(e.source) << "\">";
    if (!e.label.empty()) svg << "<title>" << xml_escape(e.label) << "</title>";
    svg << "</rect>\n";
  }
  svg << "  </g>\n"
      << "  <g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  int row = 0;
  for (const auto& [name, color] : kLegend) {
    const int y = 16 + 16 * row++;
    svg << "    <line x1=\"8\" y1=\"" << y - 4 << "\" x2=\"24\" y2=\"" << y - 4 << "\" stroke=\""
        << color << "\" stroke-width=\"3\"/>"
        << "<text x=\"30\" y=\"" << y << "\" fill=\"" << color << "\">" << name << "</text>\n";
  }
  svg << "  </g>\n</svg>\n";
  return svg.str();
}

std::string export_overlay(const ReviewSession& session) {
  return export_overlay(session.view().record, final_evidence(session));
}

std::vector<std::filesystem::path> write_export(const ReviewSession& session,
                                                const std::filesystem::path& out_dir,
                                                bool overlay) {
  const Json doc = export_record(session);
  std::string svg;
  if (overlay) svg = export_overlay(session);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const auto base = export_basename(session);
  written.push_back(out_dir / (base + ".json"));
  write_text_file_atomic(written.back(), canonical_dump(doc));
  if (overlay) {
    written.push_back(out_dir / (base + ".svg"));
    write_text_file_atomic(written.back(), svg);
  }
  return written;
}

Json write_generic_record(const ImageRecord& rec) {
  Json doc{{"image_uid", rec.image_uid}, {"image_path", rec.image_path}};
  if (rec.image_size) {
    doc["image_size"] = Json::array({rec.image_size->width, rec.image_size->height});
  }
  doc["source_adapter"] = rec.adapter;

  Json bbox = Json::array();
  Json predicted = Json::array();
  for (const auto& r : rec.regions) {
    if (r.deleted) continue;
    Json e{{"id", r.region_id}, {"bbox", ltwh(r.bbox)}};
    if (r.label) e["label"] = *r.label;
    e["source"] = to_string(r.provenance.source);
    e["edited"] = r.provenance.edited;
    if (r.source_id) e["source_id"] = *r.source_id;
    (r.provenance.source == Source::predicted ? predicted : bbox).push_back(std::move(e));
  }
  doc["bbox"] = std::move(bbox);
  doc["predicted_boxes"] = std::move(predicted);

  Json questions = Json::array();
  for (const auto& q : rec.qa_items) {
    Json jq{{"qa_id", q.qa_id},
            {"question_text", q.question_text},
            {"answer_text", q.answer_text},
            {"choices", q.choices},
            {"status", to_string(q.status)}};
    if (!q.note.empty()) jq["note"] = q.note;
    questions.push_back(std::move(jq));
  }
  doc["questions"] = std::move(questions);

  if (!rec.attributions.empty()) {
    Json atts = Json::array();
    for (const auto& a : rec.attributions) {
      Json evidence = Json::array();
      for (const auto& id : a.evidence) {
        const Region* r = rec.find_region(id);
        if (r != nullptr && !r->deleted) evidence.push_back(id);
      }
      atts.push_back(Json{{"qa_id", a.qa_id}, {"evidence", std::move(evidence)},
                          {"no_evidence", a.no_evidence}});
    }
    doc["attributions"] = std::move(atts);
  }

  for (const auto& [key, value] : rec.source_metadata.items()) {
    if (doc.contains(key)) {
      throw Error(ErrorCode::InvalidRecord,
                  "source metadata key \"" + key + "\" collides with a generic field");
    }
    doc[key] = value;
  }
  return doc;
}

Json write_generic_dataset(const std::vector<ImageRecord>& records) {
  Json out = Json::array();
  for (const auto& r : records) out.push_back(write_generic_record(r));
  return out;
}

}  // namespace evrev
