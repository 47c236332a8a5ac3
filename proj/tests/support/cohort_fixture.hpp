// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/analysis/cohort.hpp"
#include "neuroflow/common/random.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <string>

namespace neuroflow::testing {

struct SyntheticCohort {
  std::vector<analysis::LabelRow> labels;
  analysis::FeatureTable features;
};

inline std::string iso_date(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

/// One "thickness" feature with a per-group age slope, scans within 20 days of the reference visit.
inline SyntheticCohort synthetic_cohort(std::uint64_t seed, int per_group,
                                        const std::map<analysis::Diagnosis, double>& slopes) {
  using namespace std::chrono;
  Rng rng(seed);
  SyntheticCohort c;
  c.features.features = {"thickness"};
  std::map<integrator::SubjectKey, double> rows;
  int id = 0;
  for (const auto& [group, slope] : slopes)
    for (int i = 0; i < per_group; ++i) {
      analysis::LabelRow l;
      char sid[16];
      std::snprintf(sid, sizeof sid, "S%04d", id++);
      l.subject_id = sid;
      const sys_days ref = sys_days{year{2019} / 1 / 1} + days{static_cast<int>(rng.index(700))};
      l.reference_date = iso_date(ref);
      l.diagnosis = group;
      l.age = rng.uniform(55.0, 90.0);
      l.sex = rng.uniform() < 0.5 ? analysis::Sex::M : analysis::Sex::F;
      const auto scan = ref + days{static_cast<int>(rng.index(41)) - 20};
      const double y = 3.0 + slope * (l.age - 70.0) + (l.sex == analysis::Sex::M ? 0.05 : 0.0) + 0.1 * rng.normal();
      rows[{l.subject_id, iso_date(scan)}] = y;
      c.labels.push_back(std::move(l));
    }
  for (const auto& [k, v] : rows) {
    c.features.keys.push_back(k);
    c.features.values.push_back({v});
  }
  return c;
}

}  // namespace neuroflow::testing
