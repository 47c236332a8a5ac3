// SPDX-License-Identifier: Apache-2.0
// Reference statistics computed without Eigen or the incomplete beta function.
#pragma once

#include "neuroflow/common/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace neuroflow::testing {

inline double t_density(double t, double df) {
  const double log_c = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * std::numbers::pi);
  return std::exp(log_c - (df + 1) / 2 * std::log1p(t * t / df));
}

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6 * (fa + 4 * fm + fb);
}

inline double adaptive(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                       double whole, double tol, int depth) {
  const double m = (a + b) / 2;
  const double lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return adaptive(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-15) {
  const double fa = f(a), fb = f(b), fm = f((a + b) / 2);
  return detail::adaptive(f, a, b, fa, fm, fb, detail::simpson(f, a, b, fa, fm, fb), tol, 60);
}

/// P(0 < T < |x|) by quadrature of the density.
inline double t_central_mass(double x, double df) {
  return integrate([df](double t) { return t_density(t, df); }, 0.0, std::fabs(x));
}

inline double quadrature_t_cdf(double x, double df) {
  const double mass = t_central_mass(x, df);
  return x >= 0 ? 0.5 + mass : 0.5 - mass;
}

using Matrix = std::vector<std::vector<double>>;

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix invert(Matrix a) {
  const std::size_t k = a.size();
  Matrix inv(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    if (std::fabs(a[piv][c]) < 1e-300) throw std::runtime_error("singular matrix");
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t j = 0; j < k; ++j) {
      a[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < k; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

struct OracleFit {
  std::vector<double> beta, se, t, p;
  double r2 = 0.0;
};

/// Normal equations with an explicit Gram inverse; p from the quadrature CDF.
inline OracleFit oracle_ols(const Matrix& x, const std::vector<double>& y) {
  const std::size_t n = x.size(), k = x.front().size();
  Matrix gram(k, std::vector<double>(k, 0.0));
  std::vector<double> xty(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < k; ++a) {
      xty[a] += x[i][a] * y[i];
      for (std::size_t b = 0; b < k; ++b) gram[a][b] += x[i][a] * x[i][b];
    }
  const auto inv = invert(gram);
  OracleFit o;
  o.beta.assign(k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) o.beta[a] += inv[a][b] * xty[b];
  double rss = 0.0, mean = 0.0, tss = 0.0;
  for (double v : y) mean += v / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fitted = 0.0;
    for (std::size_t a = 0; a < k; ++a) fitted += x[i][a] * o.beta[a];
    rss += (y[i] - fitted) * (y[i] - fitted);
    tss += (y[i] - mean) * (y[i] - mean);
  }
  const double df = static_cast<double>(n - k);
  const double sigma2 = rss / df;
  for (std::size_t a = 0; a < k; ++a) {
    o.se.push_back(std::sqrt(sigma2 * inv[a][a]));
    o.t.push_back(o.beta[a] / o.se.back());
    o.p.push_back(1.0 - 2.0 * t_central_mass(o.t.back(), df));
  }
  o.r2 = 1.0 - rss / tss;
  return o;
}

struct OlsFixture {
  Matrix x;
  std::vector<double> y;
};

/// n=50, k=4: intercept, a standard normal, a uniform on [0, 10] and a binary column.
inline OlsFixture ols_fixture(std::uint64_t seed) {
  Rng rng(seed);
  OlsFixture f;
  const double b[4] = {1.0, 0.5, -0.2, 0.3};
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> row{1.0, rng.normal(), rng.uniform(0.0, 10.0), rng.uniform() < 0.5 ? 1.0 : 0.0};
    double y = rng.normal();
    for (int j = 0; j < 4; ++j) y += b[j] * row[static_cast<std::size_t>(j)];
    f.x.push_back(row);
    f.y.push_back(y);
  }
  return f;
}

/// BH by its rejection rule: the smallest level at which hypothesis i is rejected.
inline std::vector<double> brute_bh(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 1.0;
    for (std::size_t k = 0; k < m; ++k)
      if (sorted[k] >= p[i]) best = std::min(best, sorted[k] * static_cast<double>(m) / static_cast<double>(k + 1));
    out[i] = best;
  }
  return out;
}

}  // namespace neuroflow::testing
