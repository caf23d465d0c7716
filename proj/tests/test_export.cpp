// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"
#include "evrev/export.hpp"
#include "evrev/ingest.hpp"
#include "support.hpp"

#include <doctest.h>

#include <functional>

using namespace evrev;
using evrev::testing::fixture;
using evrev::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

EditOp op(EditKind kind, std::string target = {}, Json payload = Json::object()) {
  EditOp e;
  e.op = kind;
  e.target_id = std::move(target);
  e.payload = std::move(payload);
  return e;
}

ReviewSession reviewed(std::vector<std::string> proposal) {
  ReviewSession s = ReviewSession::open(evrev::testing::states_record(), "q_0");
  ProposalSnapshot snap;
  snap.mode = ProposalMode::selection;
  snap.response.selected_ids = std::move(proposal);
  s.attach_proposal(snap);
  return s;
}

}  // namespace

TEST_CASE("document shape and source strings") {
  ReviewSession s = reviewed({"a_2"});
  s.apply_edit(op(EditKind::select_region, "a_1"));
  s.apply_edit(op(EditKind::draw_region, "", Json{{"bbox", {40.5, 150, 100, 60}}}));
  s.apply_edit(op(EditKind::verify_qa));
  CHECK(code_of([&] { export_record(s); }) == ErrorCode::NotFinalized);
  s.finalize();

  const Json doc = export_record(s);
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"dataset_type", "image", "qa", "annotations", "metadata"});
  CHECK(doc["qa"]["question"] == "Which state borders Texas to the north?");
  CHECK(doc["qa"]["answer"] == "Oklahoma");

  const Json& ann = doc["annotations"];
  REQUIRE(ann.size() == 3);
  CHECK(ann[0]["id"] == "a_2");
  CHECK(ann[0]["meta"]["source"] == "selected");
  CHECK(ann[1]["id"] == "a_1");
  CHECK(ann[1]["meta"]["source"] == "ground_truth");
  CHECK(ann[2]["meta"]["source"] == "added");
  CHECK(ann[2]["meta"]["kind"] == "bbox");
  CHECK(ann[2]["bbox"] == Json::array({40.5, 150, 100, 60}));
  CHECK(ann[2]["label"] == "");

  std::vector<std::string> md_keys;
  for (const auto& [k, v] : doc["metadata"].items()) md_keys.push_back(k);
  CHECK(md_keys == std::vector<std::string>{"annotation_path", "ground_truth_path", "answers"});
  CHECK(export_basename(s) == "img_001__q_0");
}

TEST_CASE("deleted and generated regions") {
  ImageRecord rec = evrev::testing::states_record();
  rec.regions.clear();
  ReviewSession s = ReviewSession::open(rec, "q_0");
  ProposalSnapshot snap;
  snap.mode = ProposalMode::region_generation;
  snap.response.generated_regions = {{{10, 10, 50, 50}, "box"}, {{100, 100, 50, 50}, std::nullopt}};
  s.attach_proposal(snap);
  s.apply_edit(op(EditKind::delete_region, "a_2"));
  s.apply_edit(op(EditKind::verify_qa));
  s.finalize();
  const Json ann = export_record(s)["annotations"];
  REQUIRE(ann.size() == 1);
  CHECK(ann[0]["meta"]["source"] == "generated");
  CHECK(ann[0]["label"] == "box");
}

TEST_CASE("no-evidence sessions") {
  ReviewSession s = reviewed({"a_1"});
  s.apply_edit(op(EditKind::set_no_evidence));
  s.finalize();
  const Json doc = export_record(s);
  CHECK(doc["annotations"] == Json::array());
  CHECK(doc["metadata"]["no_visual_evidence"] == true);
}

TEST_CASE("overlay") {
  ImageRecord rec = evrev::testing::states_record();
  const std::string one =
      export_overlay(rec, {{"a_1", {10, 20, 30, 40}, "Texas & co", "added"}});
  CHECK(one.find("<rect x=\"10\" y=\"20\" width=\"30\" height=\"40\"") != std::string::npos);
  CHECK(one.find("stroke=\"" + std::string(source_color("added")) + "\"") != std::string::npos);
  CHECK(one.find("Texas &amp; co") != std::string::npos);
  CHECK(one.find("href=\"images/img_001.png\"") != std::string::npos);

  const std::string none = export_overlay(rec, {});
  CHECK(none.find("<rect") == std::string::npos);
  CHECK(none.find("id=\"legend\"") != std::string::npos);
  for (const char* s : {"selected", "added", "ground_truth", "predicted", "generated"}) {
    CHECK(none.find(std::string(">") + s + "<") != std::string::npos);
  }

  rec.image_size.reset();
  CHECK(code_of([&] { export_overlay(rec, {}); }) == ErrorCode::MissingImageSize);
}

TEST_CASE("overlay geometry follows the exported boxes") {
  ReviewSession s = reviewed({"a_1", "a_3"});
  s.apply_edit(op(EditKind::resize_region, "a_1", Json{{"bbox", {40.25, 60, 119.5, 80}}}));
  s.apply_edit(op(EditKind::verify_qa));
  s.finalize();
  const std::string svg = export_overlay(s);
  for (const auto& a : export_record(s)["annotations"]) {
    const std::string rect = "<rect x=\"" + format_number(a["bbox"][0].get<double>()) +
                             "\" y=\"" + format_number(a["bbox"][1].get<double>()) +
                             "\" width=\"" + format_number(a["bbox"][2].get<double>()) +
                             "\" height=\"" + format_number(a["bbox"][3].get<double>()) + "\"";
    CHECK(svg.find(rect) != std::string::npos);
  }
}

TEST_CASE("written files are stable and re-ingest") {
  TempDir a;
  TempDir b;
  ReviewSession s = reviewed({"a_2", "a_1"});
  s.apply_edit(op(EditKind::deselect_region, "a_1"));
  s.apply_edit(op(EditKind::draw_region, "", Json{{"bbox", {5, 5, 20.125, 30}}, {"label", "x"}}));
  s.apply_edit(op(EditKind::verify_qa));
  s.finalize();

  const auto first = write_export(s, a.path(), true);
  REQUIRE(first.size() == 2);
  CHECK(first[0].filename() == "img_001__q_0.json");
  CHECK(first[1].filename() == "img_001__q_0.svg");
  const auto second = write_export(s, b.path(), true);
  CHECK(read_text_file(first[0]) == read_text_file(second[0]));
  CHECK(read_text_file(first[1]) == read_text_file(second[1]));
  const std::string text = read_text_file(first[0]);
  CHECK(text.back() == '\n');
  CHECK(text.find('\r') == std::string::npos);

  const ImageRecord back = load_export_document(first[0]);
  CHECK(back.image_uid == "img_001");
  const auto exported = final_evidence(s);
  REQUIRE(back.regions.size() == exported.size());
  for (std::size_t i = 0; i < exported.size(); ++i) {
    CHECK(back.regions[i].region_id == exported[i].id);
    CHECK(back.regions[i].bbox == exported[i].bbox);
    CHECK(back.regions[i].label.value_or("") == exported[i].label);
    CHECK(export_source_string(back.regions[i].provenance.source) == exported[i].source);
  }
  REQUIRE(back.qa_items.size() == 1);
  CHECK(back.qa_items[0].question_text == "Which state borders Texas to the north?");
  CHECK(back.qa_items[0].answer_text == "Oklahoma");
}

TEST_CASE("generic writer") {
  const auto records = ingest_file(fixture("appendixD.json"));
  const Json doc = write_generic_dataset(records);
  REQUIRE(doc.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(adapt_record(doc[i], detect_schema(doc[i])) == records[i]);
  }

  ImageRecord clash = records[0];
  clash.source_metadata["image_uid"] = "other";
  CHECK(code_of([&] { write_generic_record(clash); }) == ErrorCode::InvalidRecord);

  ImageRecord tomb = records[0];
  REQUIRE_FALSE(tomb.regions.empty());
  tomb.regions[0].deleted = true;
  const Json written = write_generic_record(tomb);
  CHECK(written["bbox"].size() + written["predicted_boxes"].size() == tomb.regions.size() - 1);
}
