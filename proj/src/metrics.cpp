#include "crimegat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "crimegat/errors.hpp"

namespace crimegat {

namespace {

void validate_scored(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty()) throw ContractError("metrics: empty input");
  if (scores.size() != labels.size()) {
    throw ContractError("metrics: scores and labels differ in length");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw ContractError("metrics: labels must be 0 or 1");
  }
}

std::string format_double(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

ThresholdMetrics confusion_at_threshold(std::span<const double> scores,
                                        std::span<const int> labels, double t) {
  validate_scored(scores, labels);
  ThresholdMetrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= t;
    if (predicted && labels[i] == 1) ++m.counts.tp;
    else if (predicted && labels[i] == 0) ++m.counts.fp;
    else if (!predicted && labels[i] == 0) ++m.counts.tn;
    else ++m.counts.fn;
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(m.counts.tp, m.counts.tp + m.counts.fp);
  m.recall = ratio(m.counts.tp, m.counts.tp + m.counts.fn);
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  validate_scored(scores, labels);
  const std::size_t n = scores.size();
  const std::size_t pos = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw ContractError("auc_roc: needs at least one positive and one negative");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks over tied groups, 1-based.
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] == 1) rank_sum += rank[k];
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double select_threshold(std::span<const double> scores, std::span<const int> labels) {
  validate_scored(scores, labels);
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) {
    throw ContractError("select_threshold: needs at least one positive and one negative");
  }
  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  candidates.push_back(std::numeric_limits<double>::infinity());

  double best_t = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {  // ascending, so ties keep the smallest threshold
    const double f1 = confusion_at_threshold(scores, labels, t).f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

std::string render_metrics_table(std::span<const MetricsReport> reports) {
  std::size_t method_width = std::string("Method").size();
  for (const auto& r : reports) method_width = std::max(method_width, r.method.size());
  std::ostringstream out;
  std::string header = "Method";
  header.resize(method_width, ' ');
  out << header << "  Precision  Recall  F1-Score  AUC-ROC\n";
  for (const auto& r : reports) {
    std::string name = r.method;
    name.resize(method_width, ' ');
    out << name << "  " << format_double(r.precision, "%9.4f") << "  "
        << format_double(r.recall, "%6.4f") << "  " << format_double(r.f1, "%8.4f")
        << "  " << format_double(r.auc_roc, "%7.4f") << "\n";
  }
  return out.str();
}

std::string metrics_to_jsonl(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  for (const auto& r : reports) {
    out << "{\"method\":\"" << r.method << "\",\"split\":\"" << r.split << "\""
        << ",\"precision\":" << format_double(r.precision, "%.17g")
        << ",\"recall\":" << format_double(r.recall, "%.17g")
        << ",\"f1\":" << format_double(r.f1, "%.17g")
        << ",\"auc_roc\":" << format_double(r.auc_roc, "%.17g")
        << ",\"threshold\":" << format_double(r.threshold, "%.17g")
        << ",\"tp\":" << r.counts.tp << ",\"fp\":" << r.counts.fp
        << ",\"tn\":" << r.counts.tn << ",\"fn\":" << r.counts.fn << "}\n";
  }
  return out.str();
}

}  // namespace crimegat
