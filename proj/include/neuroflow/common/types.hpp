// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace neuroflow {

enum class Modality { SMRI, FMRI, DMRI, PET, TABULAR };

enum class DownstreamTask { CLASSIFICATION, REGRESSION, CORRELATION_ANALYSIS, GROUP_ANALYSIS };

inline constexpr std::array<Modality, 5> kAllModalities = {
    Modality::SMRI, Modality::FMRI, Modality::DMRI, Modality::PET, Modality::TABULAR};

inline constexpr std::array<DownstreamTask, 4> kAllTasks = {
    DownstreamTask::CLASSIFICATION, DownstreamTask::REGRESSION,
    DownstreamTask::CORRELATION_ANALYSIS, DownstreamTask::GROUP_ANALYSIS};

/// Upper-case wire token, e.g. "SMRI".
std::string_view to_string(Modality m);
std::string_view to_string(DownstreamTask t);

/// Lower-case prefix used in step ids ("smri.recon_all").
std::string_view step_prefix(Modality m);

/// Exact token match (case-insensitive). Never maps synonyms.
std::optional<Modality> parse_modality(std::string_view token);
std::optional<DownstreamTask> parse_task(std::string_view token);

using ModalitySet = std::set<Modality>;
using TaskSet = std::set<DownstreamTask>;

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string trim(std::string_view s);

}  // namespace neuroflow
