// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"
#include "evrev/meta_schema.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <regex>

using namespace evrev;
using evrev::testing::qa_item;
using evrev::testing::region;

namespace {

// Violations with positional indices blanked, sorted.
std::vector<std::string> shape_of(const ValidationReport& report) {
  static const std::regex index(R"(\[\d+\])");
  std::vector<std::string> out;
  for (const auto& v : report) {
    out.push_back(std::regex_replace(v.path, index, "[]") + "|" + v.message + "|" +
                  (v.severity == Severity::error ? "E" : "W"));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double brute_iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace

TEST_CASE("record with one QA and no regions validates clean") {
  ImageRecord rec;
  rec.image_uid = "img_001";
  rec.image_path = "path_to_image";
  rec.adapter = "generic_v1";
  rec.qa_items = {qa_item("q_0", "...", "...")};
  CHECK(validate_record(rec).empty());
}

TEST_CASE("zero-width region is reported at its w field") {
  ImageRecord rec = evrev::testing::states_record();
  rec.regions[0].bbox.w = 0;
  const auto report = validate_record(rec);
  REQUIRE(report.size() == 1);
  CHECK(report[0].path == "regions[0].bbox.w");
  CHECK(report[0].severity == Severity::error);
}

TEST_CASE("dangling attribution reference") {
  ImageRecord rec = evrev::testing::states_record();
  rec.attributions = {{"q_0", {"a_9"}, false}};
  const auto report = validate_record(rec);
  REQUIRE(report.size() == 1);
  CHECK(report[0].path == "attributions[0].evidence");
}

TEST_CASE("bounds are checked with half a pixel of slack") {
  ImageRecord rec = evrev::testing::states_record();
  rec.regions[0].bbox = {300, 0, 100.5, 10};
  CHECK(validate_record(rec).empty());
  rec.regions[0].bbox = {300, 0, 100.6, 10};
  const auto report = validate_record(rec);
  REQUIRE(report.size() == 1);
  CHECK(report[0].path == "regions[0].bbox.w");
}

TEST_CASE("QA status invariants") {
  ImageRecord rec = evrev::testing::states_record();
  rec.qa_items[0].status = QAStatus::flagged;
  CHECK(validate_record(rec).size() == 1);
  rec.qa_items[0].note = "ambiguous answer";
  CHECK(validate_record(rec).empty());
  rec.qa_items[0].status = QAStatus::verified;
  rec.qa_items[0].question_text.clear();
  CHECK(validate_record(rec).at(0).path == "qa_items[0].question_text");
}

TEST_CASE("duplicate ids and deleted references") {
  ImageRecord rec = evrev::testing::states_record();
  rec.regions[2].region_id = "a_1";
  rec.regions[1].deleted = true;
  rec.attributions = {{"q_0", {"a_2"}, false}};
  const auto shape = shape_of(validate_record(rec));
  CHECK(shape == std::vector<std::string>{
                     "attributions[].evidence|references deleted region a_2|E",
                     "regions[].region_id|duplicate region id|E"});
}

TEST_CASE("fractional marker is a warning") {
  ImageRecord rec = evrev::testing::states_record();
  rec.source_metadata["coords"] = "fractional";
  const auto report = validate_record(rec);
  REQUIRE(report.size() == 1);
  CHECK(report[0].severity == Severity::warning);
  CHECK_FALSE(has_errors(report));
}

TEST_CASE("validation is idempotent and order-insensitive") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coin(0, 5);
  for (int round = 0; round < 300; ++round) {
    ImageRecord rec;
    rec.image_uid = "img_" + std::to_string(round);
    rec.image_path = "x.png";
    rec.image_size = ImageSize{200, 100};
    const int n = 1 + coin(rng);
    for (int i = 0; i < n; ++i) {
      BBox b = evrev::testing::random_box(rng, 200, 100);
      switch (coin(rng)) {
        case 0: b.w = 0; break;
        case 1: b.x = -3; break;
        case 2: b.w += 500; break;
        default: break;
      }
      std::string id = coin(rng) == 0 ? "a_1" : "a_" + std::to_string(i + 1);
      if (coin(rng) == 0) id = "r" + std::to_string(i);
      rec.regions.push_back(region(id, b));
    }
    for (int i = 0; i < 3; ++i) {
      QAItem q = qa_item(coin(rng) == 0 ? "q_0" : "q_" + std::to_string(i), "question?", "a");
      if (coin(rng) == 0) q.status = QAStatus::flagged;
      rec.qa_items.push_back(q);
    }
    rec.attributions.push_back({"q_0", {"a_1", coin(rng) == 0 ? "a_40" : "a_2"}, false});
    rec.attributions.push_back({coin(rng) == 0 ? "q_9" : "q_1", {}, false});

    const auto first = validate_record(rec);
    CHECK(validate_record(rec) == first);

    ImageRecord shuffled = rec;
    std::shuffle(shuffled.regions.begin(), shuffled.regions.end(), rng);
    std::shuffle(shuffled.qa_items.begin(), shuffled.qa_items.end(), rng);
    std::shuffle(shuffled.attributions.begin(), shuffled.attributions.end(), rng);
    CHECK(shape_of(validate_record(shuffled)) == shape_of(first));
  }
}

TEST_CASE("iou properties") {
  CHECK(iou({0, 0, 100, 100}, {80, 80, 100, 100}) == doctest::Approx(400.0 / 19600.0));
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);
  CHECK(iou({0, 0, 0, 10}, {0, 0, 0, 10}) == 0.0);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 5000; ++i) {
    const BBox a = evrev::testing::random_box(rng, 100, 100);
    const BBox b = i % 7 == 0 ? a : evrev::testing::random_box(rng, 100, 100);
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(brute_iou(a, b)).epsilon(1e-12));
    CHECK((v == 1.0) == (a == b));
    const bool disjoint = a.right() <= b.x || b.right() <= a.x || a.bottom() <= b.y ||
                          b.bottom() <= a.y;
    CHECK((v == 0.0) == disjoint);
  }
}

TEST_CASE("clip_to") {
  CHECK(clip_to({390, 10, 20, 20}, {400, 300}) == BBox{390, 10, 10, 20});
  CHECK(clip_to({-5, -5, 10, 10}, {400, 300}) == BBox{0, 0, 5, 5});
  CHECK_FALSE(is_well_formed(clip_to({500, 10, 20, 20}, {400, 300})));
}

TEST_CASE("region and QA ids") {
  CHECK(is_export_region_id("a_1"));
  CHECK(is_export_region_id("a_120"));
  CHECK_FALSE(is_export_region_id("a_0"));
  CHECK_FALSE(is_export_region_id("a_01"));
  CHECK_FALSE(is_export_region_id("a_"));
  CHECK_FALSE(is_export_region_id("b_1"));
  CHECK_FALSE(is_export_region_id("a_1x"));

  ImageRecord rec = evrev::testing::states_record();
  CHECK(next_region_id(rec) == "a_4");
  CHECK(next_qa_id(rec) == "q_1");
  rec.qa_items.clear();
  CHECK(next_qa_id(rec) == "q_0");
}

TEST_CASE("source strings") {
  CHECK(export_source_string(Source::reviewer_added) == "added");
  CHECK(export_source_string(Source::model_selected) == "selected");
  CHECK(export_source_string(Source::model_generated) == "generated");
  CHECK(export_source_string(Source::ground_truth) == "ground_truth");
  CHECK(export_source_string(Source::predicted) == "predicted");
  for (Source s : {Source::ground_truth, Source::predicted, Source::model_selected,
                   Source::model_generated, Source::reviewer_added}) {
    CHECK(source_from_string(to_string(s)) == s);
    CHECK(source_from_any_string(export_source_string(s)) == s);
  }
  CHECK_FALSE(source_from_any_string("manual").has_value());
}

TEST_CASE("record document round trip") {
  ImageRecord rec = evrev::testing::states_record();
  rec.regions[1].provenance.edited = true;
  rec.regions[2].source_id = "ks";
  rec.regions[2].deleted = true;
  rec.attributions = {{"q_0", {"a_2", "a_1"}, false}};
  rec.source_metadata = Json{{"annotation_path", "x.json"}, {"extra", Json{{"n", 1.25}}}};
  const std::string text = canonical_dump(record_to_json(rec));
  const ImageRecord back = record_from_json(Json::parse(text));
  CHECK(back == rec);
  CHECK(canonical_dump(record_to_json(back)) == text);
}

TEST_CASE("canonical numbers never use exponents") {
  CHECK(format_number(3) == "3");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e21) == "1000000000000000000000");
  CHECK(format_number(1.5e-7) == "0.00000015");
  CHECK(format_number(123.456) == "123.456");

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(-12, 15);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::pow(10.0, mag(rng)) * (i % 2 ? -1 : 1);
    const std::string s = format_number(v);
    CHECK(s.find_first_of("eE") == std::string::npos);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("canonical dump is stable") {
  const Json doc = Json::parse(R"({"b": [1, 2.5, {"z": null, "a": "x"}], "a": true, "c": {}})");
  const std::string once = canonical_dump(doc);
  CHECK(once.back() == '\n');
  CHECK(once.find('\r') == std::string::npos);
  CHECK(canonical_dump(Json::parse(once)) == once);
  CHECK(canonical_dump_line(doc).find('\n') == std::string::npos);
}
