// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the evrev executable as a subprocess.

#include "evrev/canonical_json.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdio>
#include <string>

#include <sys/wait.h>

using evrev::testing::fixture;
using evrev::testing::TempDir;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

// `env` is a prefix of VAR=value words; the environment is otherwise cleared
// of EVREV_* settings so the host cannot leak in.
Run run(const TempDir& cwd, const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd " + quote(cwd.path().string()) +
                          " && env -u EVREV_DATA_DIR -u EVREV_BACKEND -u EVREV_CONFIG "
                          "-u EVREV_RETAIN_IOU -u EVREV_OUT_DIR -u EVREV_PORT " +
                          env + " " + quote(EVREV_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("headless pipeline") {
  TempDir dir;
  const std::string data = "--data-dir " + quote((dir / "data").string());

  auto r = run(dir, data + " ingest " + quote(fixture("appendixD.json")));
  CHECK(r.status == 0);
  CHECK(contains(r.out, "stored 2 record(s) img_001 img_002"));

  r = run(dir, data + " propose --backend mock");
  CHECK(r.status == 0);
  CHECK(contains(r.out, "img_001__q_0: selection"));
  CHECK(contains(r.out, "img_002__q_0: qa_and_region_generation"));
  r = run(dir, data + " propose --backend mock");
  CHECK(r.status == 0);
  CHECK(contains(r.out, "already proposed, skipped"));

  r = run(dir, data + " edit --script " + quote(fixture("appendixD.edits.jsonl")));
  CHECK(r.status == 0);

  r = run(dir, data + " finalize --all");
  CHECK(r.status == 0);
  CHECK(contains(r.out, "img_001__q_0: finalized retained=1"));

  r = run(dir, data + " evaluate");
  CHECK(r.status == 0);
  CHECK(r.out.rfind("Dataset", 0) == 0);
  CHECK(contains(r.out, "\nOverall"));

  r = run(dir, data + " evaluate --csv");
  CHECK(r.status == 0);
  CHECK(r.out.rfind("dataset,precision,recall,f1,", 0) == 0);

  r = run(dir, data + " export --overlay --out-dir out");
  CHECK(r.status == 0);
  CHECK(std::filesystem::exists(dir / "out" / "img_001__q_0.json"));
  CHECK(std::filesystem::exists(dir / "out" / "img_001__q_0.svg"));
  const std::string first = evrev::read_text_file(dir / "out" / "img_001__q_0.json");
  r = run(dir, data + " export --out-dir out");
  CHECK(evrev::read_text_file(dir / "out" / "img_001__q_0.json") == first);

  r = run(dir, data + " session --uid img_001 --qa q_0");
  CHECK(r.status == 0);
  CHECK(evrev::Json::parse(r.out)["state"] == "finalized");
}

TEST_CASE("single edits and declared errors") {
  TempDir dir;
  const std::string data = "--data-dir d";
  run(dir, data + " ingest " + quote(fixture("appendixD.json")));
  run(dir, data + " propose --uid img_001 --qa q_0");

  auto r = run(dir, data + " edit --uid img_001 --qa q_0 --op-json " +
                        quote(R"({"op": "select_region", "target_id": "a_9"})"));
  CHECK(r.status == 33);
  CHECK(contains(r.out, "InvalidTarget"));

  // The rejected op left the session untouched, so nothing has been reviewed.
  r = run(dir, data + " finalize --uid img_001 --qa q_0");
  CHECK(r.status == 37);

  r = run(dir, data + " session --uid img_404 --qa q_0");
  CHECK(r.status == 60);

  r = run(dir, data + " ingest " + quote(fixture("none.json")));
  CHECK(r.status == 2);

  r = run(dir, "--backend psychic propose");
  CHECK(r.status != 0);
  r = run(dir, "--retain-iou 2 evaluate");
  CHECK(r.status != 0);
  r = run(dir, "frobnicate");
  CHECK(r.status != 0);
}

TEST_CASE("validate reports per record") {
  TempDir dir;
  auto r = run(dir, "validate " + quote(fixture("appendixD.json")));
  CHECK(r.status == 0);
  CHECK(contains(r.out, "img_001"));

  evrev::write_text_file_atomic(dir / "bad.json", R"([{"image_uid": "x", "mystery": 1}])");
  r = run(dir, "validate bad.json");
  CHECK(r.status != 0);
  evrev::write_text_file_atomic(dir / "obj.json", R"({"image_uid": "x"})");
  r = run(dir, "validate obj.json");
  CHECK(r.status == 10);
}

TEST_CASE("evaluate and iaa over fixtures") {
  TempDir dir;
  auto r = run(dir, "evaluate --sessions " + quote(fixture("golden")));
  CHECK(r.status == 0);
  CHECK(contains(r.out, "85.39"));
  CHECK(contains(r.out, "75.30"));
  CHECK(contains(r.out, "80.03"));

  r = run(dir, "iaa --labels " + quote(fixture("labels/rater1.csv")) + " --labels " +
                   quote(fixture("labels/rater1.csv")));
  CHECK(r.status == 0);
  CHECK(contains(r.out, "100.0"));
  CHECK(contains(r.out, "1.000"));
  CHECK_FALSE(contains(r.out, "0.000"));

  r = run(dir, "iaa --csv --labels " + quote(fixture("labels/two_raters.csv")));
  CHECK(r.status == 0);
  CHECK(r.out.rfind("dataset,criterion,instances,agreement_pct,kappa\n", 0) == 0);

  r = run(dir, "iaa --labels " + quote(fixture("labels/rater1.csv")));
  CHECK(r.status == 40);
  r = run(dir, "iaa");
  CHECK(r.status != 0);
}

TEST_CASE("flags beat environment beats config file") {
  TempDir dir;
  evrev::write_text_file_atomic(dir / "evrev.toml", "data-dir = \"from-config\"\n");
  const std::string ds = quote(fixture("appendixD.json"));

  CHECK(run(dir, "--config evrev.toml ingest " + ds).status == 0);
  CHECK(std::filesystem::exists(dir / "from-config" / "records.json"));

  CHECK(run(dir, "--config evrev.toml ingest " + ds, "EVREV_DATA_DIR=from-env").status == 0);
  CHECK(std::filesystem::exists(dir / "from-env" / "records.json"));

  CHECK(run(dir, "--config evrev.toml --data-dir from-flag ingest " + ds,
            "EVREV_DATA_DIR=from-env")
            .status == 0);
  CHECK(std::filesystem::exists(dir / "from-flag" / "records.json"));

  // The config file itself can come from the environment.
  CHECK(run(dir, "ingest " + ds, "EVREV_CONFIG=evrev.toml").status == 0);

  CHECK(run(dir, "--config missing.toml ingest " + ds).status != 0);
}
