// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/ensemble/metrics.hpp"
#include "neuroflow/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace neuroflow::ensemble {

double mcc(const Confusion& c) {
  const double a = static_cast<double>(c.tp + c.fp), b = static_cast<double>(c.tp + c.fn);
  const double d = static_cast<double>(c.tn + c.fp), e = static_cast<double>(c.tn + c.fn);
  if (a == 0 || b == 0 || d == 0 || e == 0) return 0.0;
  const double num = static_cast<double>(c.tp) * static_cast<double>(c.tn) - static_cast<double>(c.fp) * static_cast<double>(c.fn);
  return num / std::sqrt(a * b * d * e);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ConfigError("scores and labels differ in length");
  const auto n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Mid-ranks over tied blocks; the positive rank sum gives U.
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) {
        rank_sum += mid;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return 0.5;
  const double p = static_cast<double>(positives);
  const double u = rank_sum - p * (p + 1) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

const std::array<const char*, 6>& metric_names() {
  static const std::array<const char*, 6> names{"Accuracy", "Precision", "Recall", "F1-Score", "AUC", "MCC"};
  return names;
}

Confusion confusion(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold) {
  if (probabilities.size() != labels.size()) throw ConfigError("probabilities and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = probabilities[i] >= threshold;
    if (labels[i] == 1)
      (pred ? c.tp : c.fn)++;
    else
      (pred ? c.fp : c.tn)++;
  }
  return c;
}

MetricRow compute_metrics(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold) {
  for (int l : labels)
    if (l != 0 && l != 1) throw ConfigError("labels must be 0 or 1");
  if (labels.empty()) throw ConfigError("metrics need at least one sample");
  const auto c = confusion(probabilities, labels, threshold);
  MetricRow r;
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(labels.size());
  r.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.auc = auc(probabilities, labels);
  r.mcc = mcc(c);
  return r;
}

MetricRow average(const std::vector<MetricRow>& rows) {
  MetricRow m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.accuracy += r.accuracy;
    m.precision += r.precision;
    m.recall += r.recall;
    m.f1 += r.f1;
    m.auc += r.auc;
    m.mcc += r.mcc;
  }
  const auto n = static_cast<double>(rows.size());
  return {m.accuracy / n, m.precision / n, m.recall / n, m.f1 / n, m.auc / n, m.mcc / n};
}

}  // namespace neuroflow::ensemble
