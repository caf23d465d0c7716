// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the test binaries.

#pragma once

#include "evrev/canonical_json.hpp"
#include "evrev/meta_schema.hpp"

#include <atomic>
#include <cmath>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace evrev::testing {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(EVREV_FIXTURE_DIR) / rel;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("evrev-test-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline Region region(std::string id, BBox box, std::optional<std::string> label = std::nullopt,
                     Source source = Source::ground_truth) {
  Region r;
  r.region_id = std::move(id);
  r.bbox = box;
  r.label = std::move(label);
  r.provenance.source = source;
  return r;
}

inline QAItem qa_item(std::string id, std::string question, std::string answer,
                      std::vector<std::string> choices = {}) {
  QAItem q;
  q.qa_id = std::move(id);
  q.question_text = std::move(question);
  q.answer_text = std::move(answer);
  q.choices = std::move(choices);
  return q;
}

/// 400x300 map-like record with three labeled candidates and one question.
inline ImageRecord states_record() {
  ImageRecord rec;
  rec.image_uid = "img_001";
  rec.image_path = "images/img_001.png";
  rec.image_size = ImageSize{400, 300};
  rec.adapter = "generic_v1";
  rec.regions = {region("a_1", {40, 60, 120, 80}, "Texas"),
                 region("a_2", {180, 40, 120, 70}, "Oklahoma"),
                 region("a_3", {170, 150, 120, 70}, "Kansas")};
  rec.qa_items = {qa_item("q_0", "Which state borders Texas to the north?", "Oklahoma")};
  return rec;
}

/// Random well-formed box inside a w x h image.
inline BBox random_box(std::mt19937_64& rng, double w, double h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double bw = 1.0 + u(rng) * (w / 2 - 1.0);
  const double bh = 1.0 + u(rng) * (h / 2 - 1.0);
  const double x = u(rng) * (w - bw);
  const double y = u(rng) * (h - bh);
  return {std::floor(x), std::floor(y), std::floor(bw), std::floor(bh)};
}

}  // namespace evrev::testing
