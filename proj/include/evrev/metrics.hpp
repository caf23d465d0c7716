// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evrev/utility_counts.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evrev {

struct UtilityScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// precision = TP/(TP+FP), recall = TP/(TP+FN); 0 for empty denominators.
UtilityScores compute_utility(const UtilityCounts& counts);

/// Sums the counts first, then computes the ratios.
UtilityCounts sum_counts(std::span<const UtilityCounts> counts);
UtilityScores aggregate_micro(std::span<const UtilityCounts> counts);

/// Share of false negatives that needed a newly drawn box; 0 when FN = 0.
double fn_breakdown(const UtilityCounts& counts);

enum class Criterion { CVR, CEA };

std::string_view to_string(Criterion c);
std::optional<Criterion> criterion_from_string(std::string_view text);

struct Label {
  std::string instance_id;
  std::string annotator_id;
  Criterion criterion = Criterion::CVR;
  bool verdict = false;
  std::string dataset;  // optional grouping column
};

struct LabelSet {
  std::vector<Label> labels;
};

/// CSV with header instance_id,annotator_id,criterion,verdict[,dataset].
/// Verdicts accept true/false, 1/0, yes/no, t/f. DuplicateLabel when an
/// (instance, annotator, criterion, dataset) tuple repeats.
LabelSet parse_labels_csv(std::string_view text);
LabelSet load_labels_csv(const std::filesystem::path& path);

/// Instance id -> verdict for one annotator under one criterion.
using Verdicts = std::map<std::string, bool>;

/// EmptyLabelSet / MismatchedInstances unless both sides cover the same
/// non-empty instance set.
double percent_agreement(const Verdicts& a, const Verdicts& b);

/// Two-rater, two-category Cohen's kappa. Returns 1 when chance agreement
/// is 1 (both raters constant and equal).
double cohens_kappa(const Verdicts& a, const Verdicts& b);

struct UtilityRow {
  std::string dataset;
  UtilityCounts counts;
  UtilityScores scores;
  double new_drawn_ratio = 0.0;
};

/// One row per dataset tag in first-seen order, then "Overall".
std::vector<UtilityRow> utility_table(
    const std::vector<std::pair<std::string, UtilityCounts>>& tagged_counts);

struct AgreementRow {
  std::string dataset;
  Criterion criterion = Criterion::CVR;
  std::size_t instances = 0;
  double agreement = 0.0;
  double kappa = 0.0;
};

/// Groups by (dataset, criterion) in first-seen order. Each group needs
/// exactly two annotators; otherwise MismatchedInstances.
std::vector<AgreementRow> agreement_table(const LabelSet& labels);

/// Fixed-point percentage of a ratio: percent(0.85391, 2) == "85.39".
std::string percent(double ratio, int decimals = 2);

std::string format_utility_text(const std::vector<UtilityRow>& rows);
std::string format_utility_csv(const std::vector<UtilityRow>& rows);
std::string format_agreement_text(const std::vector<AgreementRow>& rows);
std::string format_agreement_csv(const std::vector<AgreementRow>& rows);

}  // namespace evrev
