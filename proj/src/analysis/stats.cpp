// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/analysis/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace neuroflow::analysis {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kCfEps = 1e-16;
constexpr int kCfMaxIter = 100000;

/// Continued fraction for I_x(a, b) (modified Lentz).
double beta_cf(double x, double a, double b) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kCfEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

/// I_x(a, b) with y = 1 - x supplied separately so neither side loses precision.
double ibeta(double x, double y, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(y, b, a) / b;
}

void check_df(double df) {
  if (!(df > 0.0) || !std::isfinite(df)) throw ConfigError("t distribution needs finite df > 0");
}

}  // namespace

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete beta needs x in [0, 1]");
  return ibeta(x, 1.0 - x, a, b);
}

double t_sf(double x, double df) {
  check_df(df);
  if (std::isnan(x)) return x;
  if (x == 0.0) return 0.5;
  if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
  const double x2 = x * x;
  // P(|T| > |x|) = I_{df/(df+x^2)}(df/2, 1/2).
  const double two_tail = ibeta(df / (df + x2), x2 / (df + x2), df / 2.0, 0.5);
  return x > 0 ? 0.5 * two_tail : 1.0 - 0.5 * two_tail;
}

double t_cdf(double x, double df) {
  check_df(df);
  if (x == 0.0) return 0.5;
  if (x < 0.0) return t_sf(-x, df);
  return 1.0 - t_sf(x, df);
}

std::size_t OlsResult::index(const std::string& term) const {
  const auto it = std::find(terms.begin(), terms.end(), term);
  if (it == terms.end()) throw NotFoundError("no term named " + term);
  return static_cast<std::size_t>(it - terms.begin());
}

OlsResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> terms) {
  const auto n = x.rows();
  const auto k = x.cols();
  if (y.size() != n) throw ConfigError("design has " + std::to_string(n) + " rows but y has " + std::to_string(y.size()));
  if (k == 0) throw ConfigError("design has no columns");
  if (n <= k) throw ConfigError("need more observations than terms (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  if (!x.allFinite() || !y.allFinite()) throw ConfigError("design and response must be finite");
  if (terms.empty())
    for (Eigen::Index j = 0; j < k; ++j) terms.push_back("x" + std::to_string(j));
  if (static_cast<Eigen::Index>(terms.size()) != k) throw ConfigError("term names do not match design columns");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(kRankTolerance);
  const auto perm = qr.colsPermutation().indices();
  if (qr.rank() < k) {
    std::vector<std::string> dependent;
    std::string names;
    for (Eigen::Index i = qr.rank(); i < k; ++i) {
      dependent.push_back(terms[static_cast<std::size_t>(perm(i))]);
      names += (names.empty() ? "" : ", ") + dependent.back();
    }
    throw RankDeficientError(dependent, "design is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                                            std::to_string(k) + "); collinear columns: " + names);
  }

  OlsResult r;
  r.terms = std::move(terms);
  r.n = static_cast<int>(n);
  r.df_resid = static_cast<int>(n - k);
  const Eigen::VectorXd beta = qr.solve(y);
  r.rss = (y - x * beta).squaredNorm();
  const double tss = (y.array() - y.mean()).square().sum();
  r.degenerate = r.rss <= 1e-24 * y.squaredNorm();
  if (tss > 0.0)
    r.r2 = 1.0 - r.rss / tss;
  else
    r.r2 = r.degenerate ? 1.0 : 0.0;

  // X P = Q R, so (X^T X)^-1 = P (R^T R)^-1 P^T.
  const Eigen::MatrixXd rinv = qr.matrixR()
                                   .topLeftCorner(k, k)
                                   .triangularView<Eigen::Upper>()
                                   .solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd diag_perm = (rinv * rinv.transpose()).diagonal();
  const double sigma2 = r.rss / static_cast<double>(r.df_resid);

  r.beta.resize(static_cast<std::size_t>(k));
  r.se.assign(static_cast<std::size_t>(k), 0.0);
  r.t.assign(static_cast<std::size_t>(k), 0.0);
  r.p.assign(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index j = 0; j < k; ++j) r.beta[static_cast<std::size_t>(j)] = beta(j);
  if (r.degenerate) return r;
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(perm(i));
    r.se[j] = std::sqrt(sigma2 * diag_perm(i));
    r.t[j] = r.beta[j] / r.se[j];
    r.p[j] = std::clamp(2.0 * t_sf(std::fabs(r.t[j]), r.df_resid), 0.0, 1.0);
  }
  return r;
}

FdrResult bh_fdr(const std::vector<double>& p) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("p-values must lie in [0, 1]");
  FdrResult r;
  r.raw_p = p;
  r.adjusted_p.assign(p.size(), 0.0);
  const auto m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    running = std::min(running, p[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1));
    // p * m / m can round below p; the exact value never does.
    r.adjusted_p[order[i]] = std::max(running, p[order[i]]);
  }
  return r;
}

}  // namespace neuroflow::analysis
