// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace neuroflow::toolkit {

enum class MockContentKind { NIFTI, TEXT, CSV, BYTES };

/// Emit one file per match of `glob` (or per frame of the first match's dim[dim]).
struct MockRepeat {
  enum class Source { INPUT, DATA } source = Source::INPUT;
  std::string glob;  // relative to the unit directory
  std::optional<int> dim;
};

struct MockOutput {
  /// Relative to out/. "{unit}" expands to "sub-X/ses-Y", "{n}" to a zero-padded index.
  std::string path;
  MockContentKind kind = MockContentKind::TEXT;
  std::vector<int> dims{8, 8, 8};
  std::size_t bytes = 64;
  std::optional<MockRepeat> repeat;
};

struct MockBehavior {
  /// Exit code by attempt index; the last entry repeats.
  std::vector<int> exit_codes{0};
  double sleep_seconds = 0.0;
  std::string stderr_message;
  /// Output path templates to skip even on success.
  std::vector<std::string> omit;
  /// Parameters that must be passed with exactly these values, else the attempt fails.
  std::map<std::string, std::string> requires_params;
  /// Outputs keyed by modality token; "*" applies to every modality.
  std::map<std::string, std::vector<MockOutput>> outputs;

  const std::vector<MockOutput>& outputs_for(const std::string& modality) const;
};

struct MockManifest {
  std::uint64_t seed = 7;
  std::map<std::string, MockBehavior> tools;

  static MockManifest from_json(const nlohmann::json& j);
  static MockManifest load(const std::filesystem::path& path);
  static MockManifest load_default();
  nlohmann::json to_json() const;

  const MockBehavior& behavior(const std::string& tool_id) const;
};

/// Writes mock_manifest.json plus one sh stub per tool into `dir`. Each stub re-enters
/// `runner mock-tool`. Returns tool_id -> stub path.
std::map<std::string, std::filesystem::path> install_mock_suite(const MockManifest& manifest,
                                                                const std::filesystem::path& dir,
                                                                const std::filesystem::path& runner);

/// Arguments understood by mock tools (the catalog's command templates produce them).
struct MockInvocation {
  std::string modality;
  std::filesystem::path data_root;
  std::string glob;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
  std::map<std::string, std::string> params;
};

MockInvocation parse_mock_args(const std::vector<std::string>& args);

/// Executes one scripted attempt in `cwd` (the step workspace, which holds the attempt
/// counter) and returns the exit code.
int run_mock_tool(const MockManifest& manifest, const std::string& tool_id, const std::vector<std::string>& args,
                  const std::filesystem::path& cwd, std::ostream& out, std::ostream& err);

/// Subject/session unit directories ("sub-X/ses-Y") found under `root`, sorted.
std::vector<std::string> find_units(const std::filesystem::path& root);

struct SyntheticDatasetSpec {
  int subjects = 3;
  std::vector<std::string> session_dates{"20210315"};
  ModalitySet modalities{Modality::SMRI, Modality::FMRI, Modality::DMRI, Modality::PET, Modality::TABULAR};
  /// Subjects (1-based index) that carry a reverse phase-encoded b=0 fieldmap.
  std::vector<int> reverse_pe_subjects;
  int pet_frames = 4;
  std::uint64_t seed = 11;
};

/// BIDS-like raw tree: sub-NNN/ses-DATE/{anat,func,dwi,fmap,pet,tabular}/...
void make_synthetic_dataset(const std::filesystem::path& root, const SyntheticDatasetSpec& spec);

}  // namespace neuroflow::toolkit
