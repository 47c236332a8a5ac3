// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/named_regex.hpp"
#include "neuroflow/common/types.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace neuroflow::integrator {

inline constexpr const char* kManifestFile = "final_data_list.csv";
inline constexpr const char* kNotesFile = "integration_notes.jsonl";
inline constexpr const char* kDefaultSubjectPattern = "sub-(?<subject>[A-Za-z0-9]+)/ses-(?<date>[0-9-]+)";

/// SubjectID, Date, then one path column per modality in canonical order.
const std::vector<std::string>& canonical_columns();
std::string column_for(Modality m);
std::optional<Modality> modality_for_column(const std::string& canonical);

/// Accepts YYYYMMDD or YYYY-MM-DD naming a real calendar date; returns YYYY-MM-DD.
std::optional<std::string> normalize_date(std::string_view text);

struct SubjectKey {
  std::string subject_id;
  std::string date;  // YYYY-MM-DD

  auto operator<=>(const SubjectKey&) const = default;
  bool operator==(const SubjectKey&) const = default;
};

enum class JoinPolicy { UNION, INTERSECTION };
std::string_view to_string(JoinPolicy p);
JoinPolicy parse_join_policy(std::string_view token);

struct ScanEntry {
  SubjectKey key;
  std::string path;
};

struct ScanSkip {
  Modality modality;
  std::string path;
  std::string reason;
};

struct ScanRoot {
  std::filesystem::path dir;
  /// Glob over paths relative to `dir`, e.g. "sub-*/ses-*/mri/brain.nii".
  std::string pattern;
};

struct ScanResult {
  std::map<Modality, std::vector<ScanEntry>> entries;
  std::vector<ScanSkip> skips;
};

/// Walks each root for files matching its pattern and extracts (subject, date) from the
/// root-relative path with `subject_pattern` (groups `subject` and `date`). Paths are
/// reported relative to `path_base` when given, else absolute. Unparseable paths are skips.
ScanResult scan_outputs(const std::map<Modality, ScanRoot>& roots, const NamedRegex& subject_pattern,
                        const std::filesystem::path& path_base = {});

struct ManifestRow {
  SubjectKey key;
  /// Canonical column -> path; absent or empty means no data.
  std::map<std::string, std::string> paths;

  bool operator==(const ManifestRow&) const = default;
};

struct Manifest {
  std::vector<std::string> columns;
  std::vector<ManifestRow> rows;

  bool operator==(const Manifest&) const = default;
};

struct DuplicateNote {
  Modality modality;
  SubjectKey key;
  std::string kept;
  std::vector<std::string> dropped;
};

/// One row per key (UNION) or per key present in every scanned modality (INTERSECTION).
/// Columns are always the full canonical list; unscanned modalities stay empty.
/// Rows are sorted by key; duplicate keys inside a modality keep the smallest path.
Manifest build_manifest(const std::map<Modality, std::vector<ScanEntry>>& scans, JoinPolicy policy,
                        std::vector<DuplicateNote>* notes = nullptr);

std::string to_csv(const Manifest& m);
/// Refuses (IoError) when a non-empty cell does not exist relative to `path_base`.
void emit_csv(const Manifest& m, const std::filesystem::path& path, const std::filesystem::path& path_base = {});
/// Parses a manifest CSV after canonicalizing its header.
Manifest parse_manifest_csv(std::string_view text);

/// Case-insensitive synonym table for manifest columns.
class ColumnAliases {
 public:
  /// Lines "<alias>\t<canonical>", '#' comments.
  static ColumnAliases parse(std::string_view text);
  static ColumnAliases load(const std::filesystem::path& path);
  static ColumnAliases load_default();

  /// Canonical name, or the input unchanged when unknown.
  std::string canonicalize(std::string_view column) const;

 private:
  std::map<std::string, std::string> aliases_;  // lower-case alias -> canonical
};

/// Header canonicalized, rows sorted lexicographically.
csv::Table canonicalize_table(csv::Table table, const ColumnAliases& aliases);

struct IntegrateOptions {
  std::map<Modality, ScanRoot> roots;
  std::string subject_pattern = kDefaultSubjectPattern;
  JoinPolicy join = JoinPolicy::UNION;
  std::filesystem::path out_dir;
  std::filesystem::path path_base;
};

struct IntegrateResult {
  Manifest manifest;
  std::vector<DuplicateNote> duplicates;
  std::vector<ScanSkip> skips;
};

/// Scan, join and write out_dir/final_data_list.csv plus out_dir/integration_notes.jsonl.
IntegrateResult run_integration(const IntegrateOptions& opts);

/// Builtin downstream-task stub: records what the task would consume in out_dir/task.json.
void write_task_spec(DownstreamTask task, const std::filesystem::path& manifest_csv, const std::filesystem::path& out_dir);

}  // namespace neuroflow::integrator
