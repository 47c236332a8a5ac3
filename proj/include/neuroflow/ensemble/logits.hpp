// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace neuroflow::ensemble {

/// Out-of-fold logits per subject. Columns are "<modality>.<source>"; labels are 0 (CN) or 1 (AD).
struct LogitTable {
  std::vector<std::string> subject_ids;
  std::vector<int> labels;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> values;  // [subject][column]

  std::size_t size() const { return subject_ids.size(); }
  std::size_t column(const std::string& name) const;
  /// Indices of columns whose modality prefix is `modality`.
  std::vector<std::size_t> modality_columns(std::string_view modality) const;
  /// Throws ConfigError on shape errors, bad labels or a subject with no logit.
  void check() const;
};

/// Header subject_id, label, then one column per modality.source; an empty cell is missing.
LogitTable parse_logits(std::string_view csv_text);
LogitTable load_logits(const std::filesystem::path& path);

std::string_view modality_of(std::string_view column);

/// Dense matrix over the selected columns, missing cells set to the neutral logit 0.
Eigen::MatrixXd impute_neutral(const LogitTable& table, const std::vector<std::size_t>& columns);
Eigen::MatrixXd impute_neutral(const LogitTable& table);

/// Row-wise mean of the selected matrix columns.
Eigen::VectorXd average_logits(const Eigen::MatrixXd& logits, const std::vector<std::size_t>& columns);

double logistic(double z);

struct FoldAssignment {
  std::vector<int> fold;  // per subject
  int k = 5;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_indices(int f) const;
  std::vector<std::size_t> train_indices(int f) const;
};

/// Per-label seeded shuffle dealt round-robin; the second label continues where the first stopped.
FoldAssignment stratified_kfold(const std::vector<int>& labels, int k = 5, std::uint64_t seed = 0);

struct FoldSplit {
  std::vector<std::size_t> train;  // oversampled
  std::vector<std::size_t> test;   // untouched
};

/// Minority-class training rows resampled with replacement until both classes are equally frequent.
FoldSplit oversample_training(const FoldAssignment& folds, const std::vector<int>& labels, int fold,
                              std::uint64_t seed);

}  // namespace neuroflow::ensemble
