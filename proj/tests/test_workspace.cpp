// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"
#include "evrev/workspace.hpp"
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
  e.actor = "rev";
  return e;
}

WorkspaceConfig config_in(const TempDir& dir) {
  WorkspaceConfig c;
  c.data_dir = dir / "data";
  return c;
}

}  // namespace

TEST_CASE("configuration is validated") {
  TempDir dir;
  auto c = config_in(dir);
  c.retain_iou = 1.5;
  CHECK(code_of([&] { Workspace w(c); }) == ErrorCode::BadConfig);
  c = config_in(dir);
  c.backend = "oracle";
  CHECK(code_of([&] { Workspace w(c); }) == ErrorCode::BadConfig);
  c = config_in(dir);
  c.backend_concurrency = 0;
  CHECK(code_of([&] { Workspace w(c); }) == ErrorCode::BadConfig);
}

TEST_CASE("full review flow on the example dataset") {
  TempDir dir;
  Workspace ws(config_in(dir));
  CHECK(ws.ingest(fixture("appendixD.json")) == std::vector<std::string>{"img_001", "img_002"});
  REQUIRE(ws.records().size() == 2);
  CHECK(std::filesystem::exists(ws.image_path(ws.record("img_001"))));
  CHECK(code_of([&] { ws.record("img_404"); }) == ErrorCode::NotFound);

  const Json p1 = ws.propose("img_001", "q_0");
  CHECK(p1["state"] == "proposed");
  CHECK(p1["proposal"]["mode"] == "selection");
  CHECK(code_of([&] { ws.propose("img_001", "q_0"); }) == ErrorCode::AlreadyProposed);

  const Json p2 = ws.propose("img_002", "");
  CHECK(p2["qa_id"] == "q_0");
  CHECK(p2["proposal"]["mode"] == "qa_and_region_generation");

  const Json e = ws.apply_edit("img_001", "q_0",
                               op(EditKind::draw_region, "", Json{{"bbox", {40, 150, 100, 60}}}));
  CHECK(e["state"] == "in_review");
  CHECK(e["applied"]["timestamp"] == 1);
  ws.apply_edit("img_001", "q_0", op(EditKind::verify_qa));
  ws.apply_edit("img_002", "q_0", op(EditKind::verify_qa));
  CHECK(code_of([&] { ws.apply_edit("img_001", "q_0", op(EditKind::select_region, "a_99")); }) ==
        ErrorCode::InvalidTarget);

  const Json f = ws.finalize("img_001", "q_0");
  CHECK(f["state"] == "finalized");
  CHECK(f["final"]["counts"]["new_drawn_count"] == 1);
  ws.finalize("img_002", "q_0");
  CHECK(code_of([&] { ws.finalize("img_001", "q_0"); }) == ErrorCode::IllegalInState);

  // A second workspace over the same directory sees the same state.
  Workspace again(config_in(dir));
  CHECK(again.records().size() == 2);
  CHECK(again.session("img_001", "q_0") == ws.session("img_001", "q_0"));
  CHECK(again.sessions().size() == 2);

  const auto rows = again.utility();
  REQUIRE_FALSE(rows.empty());
  CHECK(rows.back().dataset == "Overall");
  const auto& total = rows.back().counts;
  CHECK(total.retained_pred_count + total.effective_removed_count == 3);

  const auto written = again.export_all(dir / "out", true);
  CHECK(written.size() == 4);
  for (const auto& p : written) CHECK(std::filesystem::exists(p));
}

TEST_CASE("re-ingest replaces records by uid") {
  TempDir dir;
  Workspace ws(config_in(dir));
  ws.ingest(fixture("appendixD.json"));
  ws.ingest(fixture("appendixD.json"));
  CHECK(ws.records().size() == 2);
  CHECK(code_of([&] { ws.ingest(fixture("missing.json")); }) == ErrorCode::IoError);
  CHECK(code_of([&] { ws.session("img_001", "q_0"); }) == ErrorCode::NotFound);
}

TEST_CASE("failed proposals are recorded and retryable") {
  TempDir dir;
  auto c = config_in(dir);
  c.backend = "http";
  c.http.url = "http://127.0.0.1:1/propose";
  c.http.timeout = std::chrono::milliseconds(300);
  c.http.retries = 0;
  {
    Workspace ws(c);
    ws.ingest(fixture("appendixD.json"));
    CHECK(code_of([&] { ws.propose("img_001", "q_0"); }) == ErrorCode::BackendUnavailable);
    const Json s = ws.session("img_001", "q_0");
    CHECK(s["state"] == "loaded");
    CHECK(s["failures"].size() == 1);
  }
  Workspace mock(config_in(dir));
  CHECK(mock.propose("img_001", "q_0")["state"] == "proposed");
  CHECK(mock.session("img_001", "q_0")["failures"].size() == 1);
}

TEST_CASE("counts from sessions and summaries") {
  const auto golden = collect_session_counts(fixture("golden"));
  REQUIRE(golden.size() == 6);
  CHECK(golden[0].first == "ChartQA");
  CHECK(golden[0].second.added_gt_count == 8308);

  TempDir dir;
  write_text_file_atomic(dir / "single.counts.json",
                         canonical_dump(Json{{"dataset_type", "X"},
                                             {"counts",
                                              {{"retained_pred_count", 1},
                                               {"effective_removed_count", 2},
                                               {"added_gt_count", 3},
                                               {"new_drawn_count", 4}}}}));
  write_text_file_atomic(dir / "ignored.txt", "hello");
  const auto one = collect_session_counts(dir.path());
  REQUIRE(one.size() == 1);
  CHECK(one[0].second.new_drawn_count == 4);

  write_text_file_atomic(dir / "bad.counts.json", "{\"dataset_type\": \"Y\"}");
  CHECK(code_of([&] { collect_session_counts(dir.path()); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { collect_session_counts(dir / "nope"); }) == ErrorCode::IoError);
}

TEST_CASE("label files per rater") {
  const auto merged =
      load_label_files({fixture("labels/rater1.csv"), fixture("labels/rater2.csv")});
  const auto combined = load_label_files({fixture("labels/two_raters.csv")});
  const auto a = agreement_table(merged);
  const auto b = agreement_table(combined);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].agreement == b[i].agreement);
    CHECK(a[i].kappa == b[i].kappa);
  }
  const auto same = agreement_table(
      load_label_files({fixture("labels/rater1.csv"), fixture("labels/rater1.csv")}));
  for (const auto& r : same) {
    CHECK(r.agreement == 1.0);
    CHECK(r.kappa == 1.0);
  }
  CHECK(code_of([] { load_label_files({}); }) == ErrorCode::InputError);
}
