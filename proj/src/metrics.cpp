#include "weightforge/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "weightforge/errors.hpp"

namespace wf::metrics {

namespace {

// Doubled average ranks of |differences|: with ties averaged, every rank is
// a multiple of 1/2, so twice the rank is an exact integer and the whole
// test runs on integer arithmetic.
std::vector<std::int64_t> doubled_ranks(const std::vector<double>& abs_diffs) {
  const std::size_t n = abs_diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return abs_diffs[a] < abs_diffs[b];
  });

  std::vector<std::int64_t> ranks2(n, 0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]]) {
      ++j;
    }
    // Ranks i+1 .. j+1 tie; average = (i+j+2)/2, doubled = i+j+2.
    const std::int64_t rank2 = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      ranks2[order[k]] = rank2;
    }
    i = j + 1;
  }
  return ranks2;
}

// Exact two-sided p: share of all 2^n sign assignments whose
// min(W+, W-) is at most the observed statistic. Gray-code walk keeps the
// running rank sum incremental.
double exact_p_value(const std::vector<std::int64_t>& ranks2,
                     std::int64_t observed_min2) {
  const std::size_t n = ranks2.size();
  const std::int64_t total2 = std::accumulate(ranks2.begin(), ranks2.end(),
                                              std::int64_t{0});
  const std::uint64_t patterns = std::uint64_t{1} << n;

  std::uint64_t hits = 0;
  std::int64_t w_plus2 = 0;  // pattern 0: every difference negative
  std::uint64_t previous_gray = 0;
  for (std::uint64_t code = 0; code < patterns; ++code) {
    const std::uint64_t gray = code ^ (code >> 1);
    const std::uint64_t changed = gray ^ previous_gray;
    if (changed != 0) {
      const int bit = std::countr_zero(changed);
      if (gray & changed) {
        w_plus2 += ranks2[static_cast<std::size_t>(bit)];
      } else {
        w_plus2 -= ranks2[static_cast<std::size_t>(bit)];
      }
    }
    previous_gray = gray;
    if (std::min(w_plus2, total2 - w_plus2) <= observed_min2) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(patterns);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Large-sample normal approximation with continuity correction and tie
// correction of the variance.
double approximate_p_value(const std::vector<std::int64_t>& ranks2, double w) {
  const double n = static_cast<double>(ranks2.size());
  const double mean = n * (n + 1.0) / 4.0;
  double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;

  std::vector<std::int64_t> sorted(ranks2);
  std::sort(sorted.begin(), sorted.end());
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) {
      ++j;
    }
    const double t = static_cast<double>(j - i + 1);
    variance -= t * (t * t - 1.0) / 48.0;
    i = j + 1;
  }
  if (variance <= 0.0) {
    return 1.0;
  }
  const double z = (w - mean + 0.5) / std::sqrt(variance);
  const double p = 2.0 * normal_cdf(z);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::diagonal() const {
  std::int64_t sum = 0;
  for (int c = 0; c < classes; ++c) {
    sum += at(c, c);
  }
  return sum;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int classes) {
  if (y_true.size() != y_pred.size()) {
    throw InputError("confusion_matrix: label vectors differ in length");
  }
  if (y_true.empty()) {
    throw InputError("confusion_matrix: empty label vectors");
  }
  if (classes < 1) {
    throw InputError("confusion_matrix: classes must be >= 1");
  }
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(static_cast<std::size_t>(classes) * classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= classes || y_pred[i] < 0 ||
        y_pred[i] >= classes) {
      throw InputError("confusion_matrix: label out of range at index " +
                       std::to_string(i));
    }
    ++cm.at(y_true[i], y_pred[i]);
  }
  return cm;
}

ClassificationReport classify_metrics(const std::vector<int>& y_true,
                                      const std::vector<int>& y_pred,
                                      int classes, Averaging averaging) {
  const ConfusionMatrix cm = confusion_matrix(y_true, y_pred, classes);
  const double total = static_cast<double>(cm.total());

  ClassificationReport report;
  report.accuracy = static_cast<double>(cm.diagonal()) / total;

  double precision_sum = 0.0;
  double recall_sum = 0.0;
  double f1_sum = 0.0;
  double weight_sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    std::int64_t row = 0;
    std::int64_t col = 0;
    for (int k = 0; k < classes; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const double tp = static_cast<double>(cm.at(c, c));
    const double precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    const double recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    const double weight = averaging == Averaging::macro
                              ? 1.0
                              : static_cast<double>(row);
    precision_sum += weight * precision;
    recall_sum += weight * recall;
    f1_sum += weight * f1;
    weight_sum += weight;
  }
  report.precision = precision_sum / weight_sum;
  report.recall = recall_sum / weight_sum;
  report.f1 = f1_sum / weight_sum;
  return report;
}

WilcoxonOutcome wilcoxon_signed_rank(const std::vector<double>& sample_a,
                                     const std::vector<double>& sample_b,
                                     double alpha) {
  if (sample_a.size() != sample_b.size()) {
    throw PairingError("wilcoxon: samples differ in length");
  }
  if (sample_a.empty()) {
    throw InputError("wilcoxon: empty samples");
  }

  std::vector<double> abs_diffs;
  std::vector<int> signs;
  abs_diffs.reserve(sample_a.size());
  for (std::size_t i = 0; i < sample_a.size(); ++i) {
    const double diff = sample_a[i] - sample_b[i];
    if (diff == 0.0) {
      continue;  // zero differences are discarded
    }
    abs_diffs.push_back(std::abs(diff));
    signs.push_back(diff > 0.0 ? 1 : -1);
  }

  WilcoxonOutcome outcome;
  outcome.alpha = alpha;
  outcome.n_effective = abs_diffs.size();
  if (abs_diffs.empty()) {
    outcome.degenerate = true;
    outcome.p_value = 1.0;
    outcome.significant = false;
    return outcome;
  }

  const auto ranks2 = doubled_ranks(abs_diffs);
  std::int64_t w_plus2 = 0;
  std::int64_t total2 = 0;
  for (std::size_t i = 0; i < ranks2.size(); ++i) {
    total2 += ranks2[i];
    if (signs[i] > 0) {
      w_plus2 += ranks2[i];
    }
  }
  const std::int64_t w_min2 = std::min(w_plus2, total2 - w_plus2);
  outcome.statistic = static_cast<double>(w_min2) / 2.0;

  if (outcome.n_effective <= 25) {
    outcome.p_value = exact_p_value(ranks2, w_min2);
  } else {
    outcome.p_value = approximate_p_value(ranks2, outcome.statistic);
  }
  outcome.significant = outcome.p_value < alpha;
  return outcome;
}

Aggregate aggregate_runs(const std::vector<double>& per_run_values) {
  if (per_run_values.empty()) {
    throw InputError("aggregate_runs: no runs");
  }
  Aggregate agg;
  agg.runs = per_run_values.size();
  double sum = 0.0;
  for (double v : per_run_values) {
    sum += v;
  }
  agg.mean = sum / static_cast<double>(agg.runs);
  if (agg.runs < 2) {
    agg.stddev = 0.0;
    agg.degenerate = true;
    return agg;
  }
  double squares = 0.0;
  for (double v : per_run_values) {
    const double centered = v - agg.mean;
    squares += centered * centered;
  }
  agg.stddev = std::sqrt(squares / static_cast<double>(agg.runs - 1));
  return agg;
}

}  // namespace wf::metrics
