#pragma once

#include <cstdint>
#include <vector>

namespace wf::metrics {

// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // classes x classes, row-major

  std::int64_t& at(int truth, int predicted) {
    return counts[static_cast<std::size_t>(truth) * classes + predicted];
  }
  std::int64_t at(int truth, int predicted) const {
    return counts[static_cast<std::size_t>(truth) * classes + predicted];
  }
  std::int64_t total() const;
  std::int64_t diagonal() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int classes);

enum class Averaging { macro, weighted };

struct ClassificationReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Accuracy plus averaged precision/recall/F1. Per-class ratios with an empty
// denominator count as 0.
ClassificationReport classify_metrics(const std::vector<int>& y_true,
                                      const std::vector<int>& y_pred,
                                      int classes,
                                      Averaging averaging = Averaging::macro);

struct WilcoxonOutcome {
  double statistic = 0.0;     // W = min(W+, W-)
  std::size_t n_effective = 0;  // pairs left after discarding zero differences
  double p_value = 1.0;
  bool significant = false;
  bool degenerate = false;  // no nonzero differences
  double alpha = 0.05;
};

// Paired two-sided Wilcoxon signed-rank test. Zero differences are
// discarded, tied |differences| share average ranks, and the p-value is
// exact (full sign enumeration) for n_effective <= 25, normal approximation
// with continuity correction above.
WilcoxonOutcome wilcoxon_signed_rank(const std::vector<double>& sample_a,
                                     const std::vector<double>& sample_b,
                                     double alpha = 0.05);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;     // sample standard deviation (n-1)
  std::size_t runs = 0;
  bool degenerate = false;  // fewer than 2 runs
};

Aggregate aggregate_runs(const std::vector<double>& per_run_values);

}  // namespace wf::metrics
