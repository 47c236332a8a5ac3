// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

namespace neuroflow::ensemble {

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Zero when any marginal is zero.
double mcc(const Confusion& c);

/// Mann-Whitney statistic over all positive/negative pairs, ties counting 1/2. 0.5 when a class is absent.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricRow {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, auc = 0, mcc = 0;

  std::array<double, 6> values() const { return {accuracy, precision, recall, f1, auc, mcc}; }
};

/// Column order of the metrics tables.
const std::array<const char*, 6>& metric_names();

/// A probability at or above the threshold predicts class 1. Precision, recall and F1 are 0 when undefined.
MetricRow compute_metrics(const std::vector<double>& probabilities, const std::vector<int>& labels,
                          double threshold = 0.5);

Confusion confusion(const std::vector<double>& probabilities, const std::vector<int>& labels, double threshold = 0.5);

/// Arithmetic mean of per-fold rows.
MetricRow average(const std::vector<MetricRow>& rows);

}  // namespace neuroflow::ensemble
