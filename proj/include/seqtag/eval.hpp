// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace seqtag {

struct TagTally {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  /// Gold occurrences.
  std::size_t support() const { return true_positive + false_negative; }
};

/// Token-level counts keyed by tag string.
struct TagCounts {
  std::map<std::string, TagTally> per_tag;
  std::size_t total_tokens = 0;
  std::size_t correct_tokens = 0;
};

using TagSequences = std::vector<std::vector<std::string>>;

/// Throws EvalError naming the sentence index when gold and pred disagree in
/// sentence count or sentence length.
TagCounts accumulate_counts(const TagSequences& gold, const TagSequences& pred);

/// Token counts indexed [gold][predicted] over every tag seen in either
/// sequence, tags sorted.
struct ConfusionMatrix {
  std::vector<std::string> tags;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t at(const std::string& gold, const std::string& pred) const;
};

/// Same alignment rules and errors as accumulate_counts.
ConfusionMatrix confusion_matrix(const TagSequences& gold, const TagSequences& pred);

/// Plain-text grid, gold tags down the side, predictions across the top.
std::string render_confusion_matrix(const ConfusionMatrix& matrix);

struct PrfScore {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
};

/// Harmonic mean of two percentages; 0 when both are 0.
double harmonic_f1(double precision, double recall);

/// Percentages for one tag; 0/0 reads as 0. Unknown tags score all zeros.
PrfScore precision_recall_f1(const TagCounts& counts, const std::string& tag);

struct TagMetrics {
  std::string tag;
  PrfScore score;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<TagMetrics> per_tag;
  /// Support-weighted averages over entity tags (every tag except "O").
  PrfScore weighted;
  double accuracy = 0.0;  // percent of tokens tagged correctly
};

/// Throws EvalError when no entity tag has gold support.
MetricsReport weighted_average(const TagCounts& counts);

/// True when at least one non-"O" tag occurs in the gold data.
bool has_entity_support(const TagCounts& counts);

struct ComparisonRow {
  std::string name;
  MetricsReport report;
};

struct RenderedTable {
  std::string text;
  std::string csv;
};

/// Model | Precision | Recall | F1-score, one decimal, best F1 marked with '*'.
RenderedTable render_comparison_table(const std::vector<ComparisonRow>& rows);

/// Fixed one-decimal rendering used by the table and CSV.
std::string format_one_decimal(double value);

}  // namespace seqtag
