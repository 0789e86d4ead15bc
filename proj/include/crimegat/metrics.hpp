#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace crimegat {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct ThresholdMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
};

// One comparison-table row: all four metrics for one method on one split.
struct MetricsReport {
  std::string method;
  std::string split;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc_roc = 0.0;
  double threshold = 0.0;
  ConfusionCounts counts;
};

// Predict positive iff score >= t. Zero-denominator precision/recall are 0.
ThresholdMetrics confusion_at_threshold(std::span<const double> scores,
                                        std::span<const int> labels, double t);

// Mann-Whitney rank statistic with midrank tie handling: the probability that
// a random positive outranks a random negative, ties credited 0.5.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Candidate thresholds are midpoints between consecutive distinct sorted
// scores plus -inf/+inf sentinels; returns the candidate maximizing F1,
// smallest on ties.
double select_threshold(std::span<const double> scores, std::span<const int> labels);

// Aligned plain-text table with columns Method, Precision, Recall, F1-Score,
// AUC-ROC.
std::string render_metrics_table(std::span<const MetricsReport> reports);

// One JSON object per report, one per line.
std::string metrics_to_jsonl(std::span<const MetricsReport> reports);

}  // namespace crimegat
