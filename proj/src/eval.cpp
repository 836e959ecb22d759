// SPDX-License-Identifier: Apache-2.0
#include "seqtag/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "seqtag/data.hpp"
#include "seqtag/errors.hpp"

namespace seqtag {

namespace {

void check_aligned(const TagSequences& gold, const TagSequences& pred) {
  if (gold.size() != pred.size()) {
    throw EvalError("gold has " + std::to_string(gold.size()) + " sentences, predictions have " +
                    std::to_string(pred.size()));
  }
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      throw EvalError("sentence " + std::to_string(s) + ": gold length " +
                      std::to_string(gold[s].size()) + ", predicted length " +
                      std::to_string(pred[s].size()));
    }
  }
}

}  // namespace

TagCounts accumulate_counts(const TagSequences& gold, const TagSequences& pred) {
  check_aligned(gold, pred);
  TagCounts counts;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      const auto& g = gold[s][t];
      const auto& p = pred[s][t];
      ++counts.total_tokens;
      if (g == p) {
        ++counts.per_tag[g].true_positive;
        ++counts.correct_tokens;
      } else {
        ++counts.per_tag[p].false_positive;
        ++counts.per_tag[g].false_negative;
      }
    }
  }
  return counts;
}

std::size_t ConfusionMatrix::at(const std::string& gold, const std::string& pred) const {
  const auto g = std::lower_bound(tags.begin(), tags.end(), gold);
  const auto p = std::lower_bound(tags.begin(), tags.end(), pred);
  if (g == tags.end() || *g != gold || p == tags.end() || *p != pred) return 0;
  return counts[static_cast<std::size_t>(g - tags.begin())][static_cast<std::size_t>(p - tags.begin())];
}

ConfusionMatrix confusion_matrix(const TagSequences& gold, const TagSequences& pred) {
  check_aligned(gold, pred);
  std::map<std::string, std::size_t> index;
  for (const auto* seqs : {&gold, &pred})
    for (const auto& s : *seqs)
      for (const auto& t : s) index.emplace(t, 0);
  ConfusionMatrix m;
  for (auto& [tag, i] : index) {
    i = m.tags.size();
    m.tags.push_back(tag);
  }
  m.counts.assign(m.tags.size(), std::vector<std::size_t>(m.tags.size(), 0));
  for (std::size_t s = 0; s < gold.size(); ++s)
    for (std::size_t t = 0; t < gold[s].size(); ++t) ++m.counts[index[gold[s][t]]][index[pred[s][t]]];
  return m;
}

std::string render_confusion_matrix(const ConfusionMatrix& matrix) {
  std::size_t width = std::string("gold\\pred").size();
  for (const auto& t : matrix.tags) width = std::max(width, t.size());
  for (const auto& row : matrix.counts)
    for (std::size_t c : row) width = std::max(width, std::to_string(c).size());
  auto cell = [width](const std::string& s) { return std::string(width - s.size() + 1, ' ') + s; };

  std::ostringstream out;
  out << cell("gold\\pred");
  for (const auto& t : matrix.tags) out << cell(t);
  out << '\n';
  for (std::size_t i = 0; i < matrix.tags.size(); ++i) {
    out << cell(matrix.tags[i]);
    for (std::size_t c : matrix.counts[i]) out << cell(std::to_string(c));
    out << '\n';
  }
  return out.str();
}

double harmonic_f1(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PrfScore precision_recall_f1(const TagCounts& counts, const std::string& tag) {
  auto it = counts.per_tag.find(tag);
  if (it == counts.per_tag.end()) return {};
  const TagTally& c = it->second;
  PrfScore s;
  s.precision = percent(c.true_positive, c.true_positive + c.false_positive);
  s.recall = percent(c.true_positive, c.true_positive + c.false_negative);
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

bool has_entity_support(const TagCounts& counts) {
  return std::any_of(counts.per_tag.begin(), counts.per_tag.end(), [](const auto& kv) {
    return kv.first != kOutsideTag && kv.second.support() > 0;
  });
}

MetricsReport weighted_average(const TagCounts& counts) {
  MetricsReport report;
  report.accuracy = percent(counts.correct_tokens, counts.total_tokens);
  std::size_t entity_support = 0;
  for (const auto& [tag, tally] : counts.per_tag) {
    report.per_tag.push_back({tag, precision_recall_f1(counts, tag), tally.support()});
    if (tag != kOutsideTag) entity_support += tally.support();
  }
  if (entity_support == 0) throw EvalError("no gold entity tokens to average over");
  for (const auto& m : report.per_tag) {
    if (m.tag == kOutsideTag || m.support == 0) continue;
    const double w = static_cast<double>(m.support) / static_cast<double>(entity_support);
    report.weighted.precision += w * m.score.precision;
    report.weighted.recall += w * m.score.recall;
    report.weighted.f1 += w * m.score.f1;
  }
  return report;
}

std::string format_one_decimal(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", value);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

RenderedTable render_comparison_table(const std::vector<ComparisonRow>& rows) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].report.weighted.f1 > rows[best].report.weighted.f1) best = i;
  }
  std::size_t name_width = std::string("Model").size();
  for (const auto& r : rows) name_width = std::max(name_width, r.name.size() + 2);

  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  auto lpad = [](const std::string& s, std::size_t w) {
    return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
  };

  std::ostringstream text;
  const std::string header = pad("Model", name_width) + " | " + lpad("Precision", 9) + " | " +
                             lpad("Recall", 9) + " | " + lpad("F1-score", 9);
  text << header << '\n' << std::string(header.size(), '-') << '\n';
  std::ostringstream csv;
  csv << "model,precision,recall,f1\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& w = rows[i].report.weighted;
    const std::string name = rows[i].name + (i == best ? " *" : "");
    text << pad(name, name_width) << " | " << lpad(format_one_decimal(w.precision), 9) << " | "
         << lpad(format_one_decimal(w.recall), 9) << " | " << lpad(format_one_decimal(w.f1), 9)
         << '\n';
    csv << csv_field(rows[i].name) << ',' << format_one_decimal(w.precision) << ','
        << format_one_decimal(w.recall) << ',' << format_one_decimal(w.f1) << '\n';
  }
  return {text.str(), csv.str()};
}

}  // namespace seqtag
