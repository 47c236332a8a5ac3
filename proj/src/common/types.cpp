// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/common/types.hpp"

#include <algorithm>
#include <cctype>

namespace neuroflow {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::SMRI: return "SMRI";
    case Modality::FMRI: return "FMRI";
    case Modality::DMRI: return "DMRI";
    case Modality::PET: return "PET";
    case Modality::TABULAR: return "TABULAR";
  }
  return "?";
}

std::string_view to_string(DownstreamTask t) {
  switch (t) {
    case DownstreamTask::CLASSIFICATION: return "CLASSIFICATION";
    case DownstreamTask::REGRESSION: return "REGRESSION";
    case DownstreamTask::CORRELATION_ANALYSIS: return "CORRELATION_ANALYSIS";
    case DownstreamTask::GROUP_ANALYSIS: return "GROUP_ANALYSIS";
  }
  return "?";
}

std::string_view step_prefix(Modality m) {
  switch (m) {
    case Modality::SMRI: return "smri";
    case Modality::FMRI: return "fmri";
    case Modality::DMRI: return "dmri";
    case Modality::PET: return "pet";
    case Modality::TABULAR: return "tabular";
  }
  return "?";
}

std::optional<Modality> parse_modality(std::string_view token) {
  const std::string up = to_upper(trim(token));
  for (Modality m : kAllModalities)
    if (to_string(m) == up) return m;
  return std::nullopt;
}

std::optional<DownstreamTask> parse_task(std::string_view token) {
  const std::string up = to_upper(trim(token));
  for (DownstreamTask t : kAllTasks)
    if (to_string(t) == up) return t;
  return std::nullopt;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace neuroflow
