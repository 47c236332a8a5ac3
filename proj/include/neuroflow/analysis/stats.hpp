// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/error.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace neuroflow::analysis {

/// Student-t CDF through the regularized incomplete beta function.
double t_cdf(double x, double df);

/// Upper tail P(T > x); no cancellation for large x.
double t_sf(double x, double df);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double x, double a, double b);

/// The design has dependent columns; `columns` names those the pivoted QR put beyond the rank.
class RankDeficientError : public Error {
 public:
  RankDeficientError(std::vector<std::string> columns, const std::string& message)
      : Error(message), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

struct OlsResult {
  std::vector<std::string> terms;
  std::vector<double> beta;
  std::vector<double> se;
  std::vector<double> t;
  std::vector<double> p;
  int n = 0;
  int df_resid = 0;
  double rss = 0.0;
  double r2 = 0.0;
  /// Zero residual variance: se, t and p are reported as 0.
  bool degenerate = false;

  std::size_t index(const std::string& term) const;
};

inline constexpr double kRankTolerance = 1e-10;

/// Least squares with a pivoted-QR rank check. `terms` defaults to x0, x1, ...
OlsResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> terms = {});

struct FdrResult {
  std::vector<double> raw_p;
  std::vector<double> adjusted_p;
  std::string method = "BH";
};

/// Benjamini-Hochberg step-up adjustment, returned in input order.
FdrResult bh_fdr(const std::vector<double>& p);

}  // namespace neuroflow::analysis
