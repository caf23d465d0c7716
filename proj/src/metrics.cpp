// Copyright 2026 The evrev Authors
// SPDX-License-Identifier: Apache-2.0

#include "evrev/metrics.hpp"

#include "evrev/canonical_json.hpp"
#include "evrev/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

namespace evrev {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Minimal RFC 4180 field splitter: quoted fields may hold commas and "".
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::optional<bool> parse_verdict(std::string_view text) {
  const std::string v = lower(text);
  if (v == "true" || v == "1" || v == "yes" || v == "t" || v == "y") return true;
  if (v == "false" || v == "0" || v == "no" || v == "f" || v == "n") return false;
  return std::nullopt;
}

void check_pair(const Verdicts& a, const Verdicts& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyLabelSet, "no labels to compare");
  if (a.size() != b.size() ||
      !std::equal(a.begin(), a.end(), b.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw Error(ErrorCode::MismatchedInstances, "annotators labeled different instances");
  }
}

std::string pad(std::string s, std::size_t width, bool left_align) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left_align ? s + fill : fill + s;
}

// Aligned columns with a rule under the header and, when `total_row`, above
// the last row.
std::string render(const std::vector<std::vector<std::string>>& table, bool total_row) {
  std::vector<std::size_t> widths;
  for (const auto& row : table) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < table[r].size(); ++i) {
      if (i > 0) line += "  ";
      line += pad(table[r][i], widths[i], i == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (r == 0 || (total_row && r + 2 == table.size())) {
      std::size_t total = 0;
      for (auto w : widths) total += w;
      total += 2 * (widths.size() - 1);
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

UtilityScores compute_utility(const UtilityCounts& c) {
  UtilityScores s;
  s.precision = ratio(c.tp(), c.tp() + c.fp());
  s.recall = ratio(c.tp(), c.tp() + c.fn());
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

UtilityCounts sum_counts(std::span<const UtilityCounts> counts) {
  UtilityCounts total;
  for (const auto& c : counts) total += c;
  return total;
}

UtilityScores aggregate_micro(std::span<const UtilityCounts> counts) {
  return compute_utility(sum_counts(counts));
}

double fn_breakdown(const UtilityCounts& c) { return ratio(c.new_drawn_count, c.fn()); }

std::string_view to_string(Criterion c) { return c == Criterion::CVR ? "CVR" : "CEA"; }

std::optional<Criterion> criterion_from_string(std::string_view text) {
  const std::string v = lower(text);
  if (v == "cvr") return Criterion::CVR;
  if (v == "cea") return Criterion::CEA;
  return std::nullopt;
}

LabelSet parse_labels_csv(std::string_view text) {
  LabelSet set;
  std::vector<std::string> header;
  std::map<std::string, std::size_t> col;
  std::set<std::tuple<std::string, std::string, Criterion, std::string>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = fields;
      for (std::size_t i = 0; i < header.size(); ++i) col[lower(header[i])] = i;
      for (const char* required : {"instance_id", "annotator_id", "criterion", "verdict"}) {
        if (!col.count(required)) {
          throw Error(ErrorCode::ParseError,
                      std::string("labels file is missing the ") + required + " column");
        }
      }
      continue;
    }
    auto field = [&](const char* name) -> std::string {
      auto it = col.find(name);
      return it == col.end() || it->second >= fields.size() ? std::string() : fields[it->second];
    };
    const auto where = "line " + std::to_string(line_no);
    Label label;
    label.instance_id = field("instance_id");
    label.annotator_id = field("annotator_id");
    label.dataset = field("dataset");
    if (label.instance_id.empty() || label.annotator_id.empty()) {
      throw Error(ErrorCode::ParseError, where + ": empty instance or annotator id");
    }
    const auto crit = criterion_from_string(field("criterion"));
    if (!crit) throw Error(ErrorCode::ParseError, where + ": criterion must be CVR or CEA");
    label.criterion = *crit;
    const auto verdict = parse_verdict(field("verdict"));
    if (!verdict) throw Error(ErrorCode::ParseError, where + ": unreadable verdict");
    label.verdict = *verdict;
    if (!seen.emplace(label.instance_id, label.annotator_id, label.criterion, label.dataset)
             .second) {
      throw Error(ErrorCode::DuplicateLabel, where + ": " + label.annotator_id +
                                                 " labeled " + label.instance_id + " twice");
    }
    set.labels.push_back(std::move(label));
  }
  return set;
}

LabelSet load_labels_csv(const std::filesystem::path& path) {
  return parse_labels_csv(read_text_file(path));
}

double percent_agreement(const Verdicts& a, const Verdicts& b) {
  check_pair(a, b);
  std::size_t same = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->second == ib->second) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(a.size());
}

double cohens_kappa(const Verdicts& a, const Verdicts& b) {
  const double po = percent_agreement(a, b);
  const double n = static_cast<double>(a.size());
  double ta = 0;
  double tb = 0;
  for (const auto& [id, v] : a) ta += v ? 1 : 0;
  for (const auto& [id, v] : b) tb += v ? 1 : 0;
  const double pa = ta / n;
  const double pb = tb / n;
  const double pe = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

std::vector<UtilityRow> utility_table(
    const std::vector<std::pair<std::string, UtilityCounts>>& tagged) {
  std::vector<UtilityRow> rows;
  UtilityCounts overall;
  for (const auto& [tag, counts] : tagged) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const UtilityRow& r) { return r.dataset == tag; });
    if (it == rows.end()) {
      rows.push_back({tag, {}, {}, 0.0});
      it = std::prev(rows.end());
    }
    it->counts += counts;
    overall += counts;
  }
  rows.push_back({"Overall", overall, {}, 0.0});
  for (auto& r : rows) {
    r.scores = compute_utility(r.counts);
    r.new_drawn_ratio = fn_breakdown(r.counts);
  }
  return rows;
}

std::vector<AgreementRow> agreement_table(const LabelSet& set) {
  if (set.labels.empty()) throw Error(ErrorCode::EmptyLabelSet, "labels file has no rows");
  struct Group {
    std::string dataset;
    Criterion criterion;
    std::vector<std::string> annotators;
    std::map<std::string, Verdicts> verdicts;
  };
  std::vector<Group> groups;
  for (const auto& l : set.labels) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.dataset == l.dataset && g.criterion == l.criterion;
    });
    if (it == groups.end()) {
      groups.push_back({l.dataset, l.criterion, {}, {}});
      it = std::prev(groups.end());
    }
    if (std::find(it->annotators.begin(), it->annotators.end(), l.annotator_id) ==
        it->annotators.end()) {
      it->annotators.push_back(l.annotator_id);
    }
    it->verdicts[l.annotator_id][l.instance_id] = l.verdict;
  }
  std::vector<AgreementRow> rows;
  for (const auto& g : groups) {
    const std::string name = (g.dataset.empty() ? std::string("all") : g.dataset) + "/" +
                             std::string(to_string(g.criterion));
    if (g.annotators.size() != 2) {
      throw Error(ErrorCode::MismatchedInstances,
                  name + " needs exactly two annotators, found " +
                      std::to_string(g.annotators.size()));
    }
    const auto& a = g.verdicts.at(g.annotators[0]);
    const auto& b = g.verdicts.at(g.annotators[1]);
    AgreementRow row;
    row.dataset = g.dataset;
    row.criterion = g.criterion;
    row.instances = a.size();
    try {
      row.agreement = percent_agreement(a, b);
      row.kappa = cohens_kappa(a, b);
    } catch (const Error& e) {
      throw Error(e.code(), name + ": " + e.what());
    }
    rows.push_back(row);
  }
  return rows;
}

std::string percent(double r, int decimals) { return fixed(r * 100.0, decimals); }

std::string format_utility_text(const std::vector<UtilityRow>& rows) {
  std::vector<std::vector<std::string>> t{{"Dataset", "Precision", "Recall", "F1", "Retained",
                                           "Removed", "Added GT", "New Drawn",
                                           "New Drawn (%)"}};
  for (const auto& r : rows) {
    t.push_back({r.dataset, percent(r.scores.precision), percent(r.scores.recall),
                 percent(r.scores.f1), std::to_string(r.counts.retained_pred_count),
                 std::to_string(r.counts.effective_removed_count),
                 std::to_string(r.counts.added_gt_count), std::to_string(r.counts.new_drawn_count),
                 percent(r.new_drawn_ratio)});
  }
  return render(t, true);
}

std::string format_utility_csv(const std::vector<UtilityRow>& rows) {
  std::ostringstream out;
  out << "dataset,precision,recall,f1,retained_pred_count,effective_removed_count,"
         "added_gt_count,new_drawn_count,new_drawn_pct\n";
  for (const auto& r : rows) {
    out << csv_field(r.dataset) << ',' << percent(r.scores.precision) << ','
        << percent(r.scores.recall) << ',' << percent(r.scores.f1) << ','
        << r.counts.retained_pred_count << ',' << r.counts.effective_removed_count << ','
        << r.counts.added_gt_count << ',' << r.counts.new_drawn_count << ','
        << percent(r.new_drawn_ratio) << '\n';
  }
  return out.str();
}

std::string format_agreement_text(const std::vector<AgreementRow>& rows) {
  std::vector<std::vector<std::string>> t{
      {"Dataset", "Criterion", "Instances", "Agreement (%)", "Kappa"}};
  for (const auto& r : rows) {
    t.push_back({r.dataset.empty() ? "all" : r.dataset, std::string(to_string(r.criterion)),
                 std::to_string(r.instances), percent(r.agreement, 1), fixed(r.kappa, 3)});
  }
  return render(t, false);
}

std::string format_agreement_csv(const std::vector<AgreementRow>& rows) {
  std::ostringstream out;
  out << "dataset,criterion,instances,agreement_pct,kappa\n";
  for (const auto& r : rows) {
    out << csv_field(r.dataset) << ',' << to_string(r.criterion) << ',' << r.instances << ','
        << percent(r.agreement, 1) << ',' << fixed(r.kappa, 3) << '\n';
  }
  return out.str();
}

}  // namespace evrev
