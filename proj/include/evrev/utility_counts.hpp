// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace evrev {

/// Review outcome of one QA item against its proposal.
/// TP = retained, FP = effective_removed, FN = added_gt + new_drawn.
/// There is deliberately no true-negative count.
struct UtilityCounts {
  std::uint64_t retained_pred_count = 0;
  std::uint64_t effective_removed_count = 0;
  std::uint64_t added_gt_count = 0;
  std::uint64_t new_drawn_count = 0;

  std::uint64_t tp() const { return retained_pred_count; }
  std::uint64_t fp() const { return effective_removed_count; }
  std::uint64_t fn() const { return added_gt_count + new_drawn_count; }

  UtilityCounts& operator+=(const UtilityCounts& o) {
    retained_pred_count += o.retained_pred_count;
    effective_removed_count += o.effective_removed_count;
    added_gt_count += o.added_gt_count;
    new_drawn_count += o.new_drawn_count;
    return *this;
  }

  friend bool operator==(const UtilityCounts&, const UtilityCounts&) = default;
};

}  // namespace evrev
