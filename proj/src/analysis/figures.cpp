// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/analysis/figures.hpp"
#include "neuroflow/common/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace neuroflow::analysis {

using nlohmann::json;

std::string_view to_string(FigureKind k) { return k == FigureKind::SCATTER_FIT ? "SCATTER_FIT" : "GROUP_BOX"; }

FigureKind parse_figure_kind(std::string_view token) {
  if (token == "SCATTER_FIT") return FigureKind::SCATTER_FIT;
  if (token == "GROUP_BOX") return FigureKind::GROUP_BOX;
  throw ConfigError("figure kind must be SCATTER_FIT or GROUP_BOX: " + std::string(token));
}

FeatureData collect_feature(const FeatureTable& features, const std::vector<MatchedVisit>& cohort,
                            const std::string& feature) {
  const auto f = features.feature_index(feature);
  FeatureData d;
  d.feature = feature;
  for (const auto& v : cohort) {
    const auto r = features.row({v.label.subject_id, v.scan_date});
    if (!r || !features.values[*r][f]) continue;
    d.points.push_back({v.label.subject_id, v.scan_date, v.label.diagnosis, v.label.age, *features.values[*r][f]});
  }
  d.fits = group_age_regressions(features, cohort, feature);
  return d;
}

BoxSummary box_summary(std::vector<double> values) {
  if (values.empty()) throw ConfigError("box summary of an empty group");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
  };
  BoxSummary b;
  b.n = values.size();
  b.median = quantile(0.5);
  b.q1 = quantile(0.25);
  b.q3 = quantile(0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    b.whisker_low = std::min(b.whisker_low, v);
    b.whisker_high = std::max(b.whisker_high, v);
  }
  return b;
}

namespace {

constexpr std::array<Diagnosis, 3> kGroups{Diagnosis::CN, Diagnosis::MCI, Diagnosis::AD};
constexpr double kWidth = 480, kHeight = 360, kMargin = 50;

const char* colour(Diagnosis g) {
  switch (g) {
    case Diagnosis::CN:
      return "#1b9e77";
    case Diagnosis::MCI:
      return "#d95f02";
    case Diagnosis::AD:
      return "#7570b3";
  }
  return "#000000";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Linear map from a data range onto a pixel range; a zero-width range maps to its midpoint.
struct Axis {
  double lo, hi, px_lo, px_hi;
  double operator()(double v) const {
    if (hi <= lo) return (px_lo + px_hi) / 2;
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

Axis padded(double lo, double hi, double px_lo, double px_hi) {
  const double pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
  return {lo - pad, hi + pad, px_lo, px_hi};
}

std::ostringstream svg_open(const std::string& title, const std::string& x_label, const std::string& y_label) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(title)
    << "</text>\n"
    << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin / 2 << "\" y2=\""
    << kHeight - kMargin << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin / 2 << "\" x2=\"" << kMargin << "\" y2=\"" << kHeight - kMargin
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
    << "</text>\n"
    << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kHeight / 2
    << ")\">" << xml_escape(y_label) << "</text>\n";
  return s;
}

void axis_ticks(std::ostringstream& s, const Axis& x, const Axis& y, bool x_numeric) {
  for (double v : {y.lo, (y.lo + y.hi) / 2, y.hi})
    s << "<text x=\"" << kMargin - 4 << "\" y=\"" << num(y(v) + 4) << "\" text-anchor=\"end\">" << num(v)
      << "</text>\n";
  if (x_numeric)
    for (double v : {x.lo, (x.lo + x.hi) / 2, x.hi})
      s << "<text x=\"" << num(x(v)) << "\" y=\"" << kHeight - kMargin + 14 << "\" text-anchor=\"middle\">" << num(v)
        << "</text>\n";
}

void legend(std::ostringstream& s, const std::vector<Diagnosis>& groups) {
  double y = kMargin / 2 + 6;
  for (Diagnosis g : groups) {
    s << "<rect x=\"" << kWidth - 70 << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\"" << colour(g)
      << "\"/><text x=\"" << kWidth - 55 << "\" y=\"" << y << "\">" << to_string(g) << "</text>\n";
    y += 14;
  }
}

json group_points(const FeatureData& d, Diagnosis g) {
  json pts = json::array();
  for (const auto& p : d.points)
    if (p.group == g) pts.push_back({{"subject_id", p.subject_id}, {"date", p.date}, {"x", p.age}, {"y", p.value}});
  return pts;
}

std::vector<double> group_values(const FeatureData& d, Diagnosis g) {
  std::vector<double> out;
  for (const auto& p : d.points)
    if (p.group == g) out.push_back(p.value);
  return out;
}

const GroupFit* fit_for(const FeatureData& d, Diagnosis g) {
  for (const auto& f : d.fits)
    if (f.group == g) return &f;
  return nullptr;
}

Figure scatter(const FeatureData& d) {
  Figure fig;
  fig.data = {{"kind", "SCATTER_FIT"}, {"feature", d.feature}, {"x_label", "age"}, {"y_label", d.feature}};
  json groups = json::array();
  std::vector<Diagnosis> present;
  for (Diagnosis g : kGroups) {
    auto pts = group_points(d, g);
    if (pts.empty()) continue;
    present.push_back(g);
    json fit = nullptr;
    if (const auto* f = fit_for(d, g))
      fit = {{"intercept", f->fit.beta[0]}, {"slope", f->fit.beta[1]}, {"p", f->fit.p[1]},
             {"n", f->fit.n},               {"r2", f->fit.r2},        {"degenerate", f->fit.degenerate}};
    groups.push_back({{"group", to_string(g)}, {"points", std::move(pts)}, {"fit", std::move(fit)}});
  }
  fig.data["groups"] = std::move(groups);

  auto s = svg_open(d.feature + " by age", "age", d.feature);
  if (!d.points.empty()) {
    const auto [xmin, xmax] = std::minmax_element(d.points.begin(), d.points.end(),
                                                  [](const auto& a, const auto& b) { return a.age < b.age; });
    const auto [ymin, ymax] = std::minmax_element(d.points.begin(), d.points.end(),
                                                  [](const auto& a, const auto& b) { return a.value < b.value; });
    const Axis x = padded(xmin->age, xmax->age, kMargin, kWidth - kMargin / 2);
    const Axis y = padded(ymin->value, ymax->value, kHeight - kMargin, kMargin / 2);
    axis_ticks(s, x, y, true);
    for (const auto& p : d.points)
      s << "<circle cx=\"" << num(x(p.age)) << "\" cy=\"" << num(y(p.value)) << "\" r=\"2.5\" fill=\"" << colour(p.group)
        << "\" fill-opacity=\"0.6\"/>\n";
    for (const auto& f : d.fits) {
      const double a = f.fit.beta[0], b = f.fit.beta[1];
      s << "<line x1=\"" << num(x(x.lo)) << "\" y1=\"" << num(y(a + b * x.lo)) << "\" x2=\"" << num(x(x.hi))
        << "\" y2=\"" << num(y(a + b * x.hi)) << "\" stroke=\"" << colour(f.group) << "\" stroke-width=\"2\"/>\n";
    }
  }
  legend(s, present);
  s << "</svg>\n";
  fig.svg = s.str();
  return fig;
}

Figure boxes(const FeatureData& d) {
  Figure fig;
  fig.data = {{"kind", "GROUP_BOX"}, {"feature", d.feature}, {"y_label", d.feature}};
  json groups = json::array();
  std::vector<std::pair<Diagnosis, BoxSummary>> summaries;
  for (Diagnosis g : kGroups) {
    const auto values = group_values(d, g);
    if (values.empty()) continue;
    const auto b = box_summary(values);
    summaries.emplace_back(g, b);
    groups.push_back({{"group", to_string(g)},
                      {"n", b.n},
                      {"median", b.median},
                      {"q1", b.q1},
                      {"q3", b.q3},
                      {"whisker_low", b.whisker_low},
                      {"whisker_high", b.whisker_high},
                      {"outliers", b.outliers},
                      {"points", group_points(d, g)}});
  }
  fig.data["groups"] = std::move(groups);

  auto s = svg_open(d.feature + " by diagnosis", "diagnosis", d.feature);
  if (!summaries.empty()) {
    double lo = summaries.front().second.whisker_low, hi = summaries.front().second.whisker_high;
    for (const auto& [g, b] : summaries) {
      lo = std::min({lo, b.whisker_low, b.outliers.empty() ? lo : *std::min_element(b.outliers.begin(), b.outliers.end())});
      hi = std::max({hi, b.whisker_high, b.outliers.empty() ? hi : *std::max_element(b.outliers.begin(), b.outliers.end())});
    }
    const Axis y = padded(lo, hi, kHeight - kMargin, kMargin / 2);
    axis_ticks(s, Axis{0, 1, 0, 0}, y, false);
    const double slot = (kWidth - 1.5 * kMargin) / static_cast<double>(summaries.size());
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      const auto& [g, b] = summaries[i];
      const double cx = kMargin + slot * (static_cast<double>(i) + 0.5);
      const double half = slot * 0.25;
      s << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y(b.whisker_low)) << "\" x2=\"" << num(cx) << "\" y2=\""
        << num(y(b.whisker_high)) << "\" stroke=\"black\"/>\n"
        << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(y(b.q3)) << "\" width=\"" << num(2 * half)
        << "\" height=\"" << num(y(b.q1) - y(b.q3)) << "\" fill=\"" << colour(g) << "\" fill-opacity=\"0.5\" stroke=\"black\"/>\n"
        << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(y(b.median)) << "\" x2=\"" << num(cx + half)
        << "\" y2=\"" << num(y(b.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
      for (double o : b.outliers)
        s << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(y(o)) << "\" r=\"2\" fill=\"none\" stroke=\"black\"/>\n";
      s << "<text x=\"" << num(cx) << "\" y=\"" << kHeight - kMargin + 14 << "\" text-anchor=\"middle\">" << to_string(g)
        << " (n=" << b.n << ")</text>\n";
    }
  }
  s << "</svg>\n";
  fig.svg = s.str();
  return fig;
}

}  // namespace

Figure emit_figure_data(const FeatureData& data, FigureKind kind) {
  return kind == FigureKind::SCATTER_FIT ? scatter(data) : boxes(data);
}

}  // namespace neuroflow::analysis
