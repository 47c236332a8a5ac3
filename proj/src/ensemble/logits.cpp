// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/ensemble/logits.hpp"
#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/common/random.hpp"
#include "neuroflow/common/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

namespace neuroflow::ensemble {

std::string_view modality_of(std::string_view column) {
  const auto dot = column.find('.');
  return dot == std::string_view::npos ? column : column.substr(0, dot);
}

std::size_t LogitTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw NotFoundError("no logit column " + name);
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<std::size_t> LogitTable::modality_columns(std::string_view modality) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (modality_of(columns[i]) == modality) out.push_back(i);
  return out;
}

void LogitTable::check() const {
  if (labels.size() != subject_ids.size() || values.size() != subject_ids.size())
    throw ConfigError("logit table rows are inconsistent");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!seen.insert(subject_ids[i]).second) throw ConfigError("duplicate subject " + subject_ids[i]);
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("label of " + subject_ids[i] + " must be 0 or 1");
    if (values[i].size() != columns.size()) throw ConfigError("row of " + subject_ids[i] + " has the wrong width");
    if (std::none_of(values[i].begin(), values[i].end(), [](const auto& v) { return v.has_value(); }))
      throw ConfigError("subject " + subject_ids[i] + " has no logit");
    for (const auto& v : values[i])
      if (v && !std::isfinite(*v)) throw ConfigError("non-finite logit for " + subject_ids[i]);
  }
  for (const auto& c : columns)
    if (c.find('.') == std::string::npos || c.front() == '.' || c.back() == '.')
      throw ConfigError("logit column must be <modality>.<source>: " + c);
}

LogitTable parse_logits(std::string_view csv_text) {
  const auto t = csv::parse_table(csv_text);
  const int sid = t.column("subject_id");
  const int lab = t.column("label");
  if (sid < 0 || lab < 0) throw ConfigError("logits CSV needs subject_id and label columns");
  LogitTable out;
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (static_cast<int>(i) == sid || static_cast<int>(i) == lab) continue;
    out.columns.push_back(trim(t.header[i]));
    cols.push_back(i);
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) throw ConfigError("logits row " + std::to_string(r + 2) + " has the wrong width");
    out.subject_ids.push_back(trim(row[static_cast<std::size_t>(sid)]));
    const auto label = to_upper(trim(row[static_cast<std::size_t>(lab)]));
    if (label == "0" || label == "CN")
      out.labels.push_back(0);
    else if (label == "1" || label == "AD")
      out.labels.push_back(1);
    else
      throw ConfigError("label must be 0/1 (CN/AD), got '" + label + "' on row " + std::to_string(r + 2));
    std::vector<std::optional<double>> values;
    for (auto c : cols) {
      const auto cell = trim(row[c]);
      if (cell.empty()) {
        values.emplace_back();
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() + cell.size()) throw ConfigError("not a number on row " + std::to_string(r + 2) + ": " + cell);
      values.emplace_back(v);
    }
    out.values.push_back(std::move(values));
  }
  out.check();
  return out;
}

LogitTable load_logits(const std::filesystem::path& path) { return parse_logits(read_file(path)); }

Eigen::MatrixXd impute_neutral(const LogitTable& table, const std::vector<std::size_t>& columns) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t j = 0; j < columns.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.values[i].at(columns[j]).value_or(0.0);
  return m;
}

Eigen::MatrixXd impute_neutral(const LogitTable& table) {
  std::vector<std::size_t> all(table.columns.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return impute_neutral(table, all);
}

Eigen::VectorXd average_logits(const Eigen::MatrixXd& logits, const std::vector<std::size_t>& columns) {
  if (columns.empty()) throw ConfigError("averaging needs at least one column");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(logits.rows());
  for (auto c : columns) {
    if (static_cast<Eigen::Index>(c) >= logits.cols()) throw ConfigError("column index out of range");
    sum += logits.col(static_cast<Eigen::Index>(c));
  }
  return sum / static_cast<double>(columns.size());
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<std::size_t> FoldAssignment::test_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] != f) out.push_back(i);
  return out;
}

FoldAssignment stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  FoldAssignment a;
  a.k = k;
  a.seed = seed;
  a.fold.assign(labels.size(), -1);
  Rng rng(seed);
  int next = 0;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    rng.shuffle(members);
    for (auto i : members) {
      a.fold[i] = next;
      next = (next + 1) % k;
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (a.fold[i] < 0) throw ConfigError("labels must be 0 or 1");
  return a;
}

FoldSplit oversample_training(const FoldAssignment& folds, const std::vector<int>& labels, int fold,
                              std::uint64_t seed) {
  if (fold < 0 || fold >= folds.k) throw ConfigError("fold index out of range");
  if (labels.size() != folds.fold.size()) throw ConfigError("labels and fold assignment differ in size");
  FoldSplit s;
  s.test = folds.test_indices(fold);
  s.train = folds.train_indices(fold);
  std::vector<std::size_t> pos, neg;
  for (auto i : s.train) (labels[i] == 1 ? pos : neg).push_back(i);
  auto& minority = pos.size() < neg.size() ? pos : neg;
  const auto target = std::max(pos.size(), neg.size());
  if (minority.empty()) return s;  // one class only; nothing to resample from
  Rng rng(seed);
  const auto originals = minority;
  while (minority.size() < target) {
    const auto pick = originals[rng.index(originals.size())];
    minority.push_back(pick);
    s.train.push_back(pick);
  }
  return s;
}

}  // namespace neuroflow::ensemble
