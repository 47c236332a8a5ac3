// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/integrator/manifest.hpp"

#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/validator/schema.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace neuroflow::integrator {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& canonical_columns() {
  static const std::vector<std::string> cols{"SubjectID",  "Date",     "sMRI_path",   "PET_path",
                                             "fMRI_path", "DTI_path", "Tabular_path"};
  return cols;
}

std::string column_for(Modality m) {
  switch (m) {
    case Modality::SMRI: return "sMRI_path";
    case Modality::FMRI: return "fMRI_path";
    case Modality::DMRI: return "DTI_path";
    case Modality::PET: return "PET_path";
    case Modality::TABULAR: return "Tabular_path";
  }
  return {};
}

std::optional<Modality> modality_for_column(const std::string& canonical) {
  for (Modality m : kAllModalities)
    if (column_for(m) == canonical) return m;
  return std::nullopt;
}

std::optional<std::string> normalize_date(std::string_view text) {
  std::string digits;
  if (text.size() == 8) {
    digits = std::string(text);
  } else if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    digits = std::string(text.substr(0, 4)) + std::string(text.substr(5, 2)) + std::string(text.substr(8, 2));
  } else {
    return std::nullopt;
  }
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
  const int y = std::stoi(digits.substr(0, 4));
  const unsigned mo = static_cast<unsigned>(std::stoi(digits.substr(4, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(digits.substr(6, 2)));
  if (!std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}}.ok())
    return std::nullopt;
  return digits.substr(0, 4) + "-" + digits.substr(4, 2) + "-" + digits.substr(6, 2);
}

std::string_view to_string(JoinPolicy p) { return p == JoinPolicy::UNION ? "UNION" : "INTERSECTION"; }

JoinPolicy parse_join_policy(std::string_view token) {
  const auto t = to_upper(token);
  if (t == "UNION") return JoinPolicy::UNION;
  if (t == "INTERSECTION") return JoinPolicy::INTERSECTION;
  throw ConfigError("unknown join policy '" + std::string(token) + "' (expected UNION or INTERSECTION)");
}

ScanResult scan_outputs(const std::map<Modality, ScanRoot>& roots, const NamedRegex& subject_pattern,
                        const fs::path& path_base) {
  if (!subject_pattern.has_group("subject") || !subject_pattern.has_group("date"))
    throw ConfigError("subject pattern needs named groups 'subject' and 'date': " + subject_pattern.pattern());
  ScanResult result;
  for (const auto& [modality, root] : roots) {
    auto& entries = result.entries[modality];
    std::error_code ec;
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root.dir, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec))
      if (it->is_regular_file()) files.push_back(it->path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const std::string rel = relative_generic(file, root.dir);
      if (!validator::glob_match(root.pattern, rel)) continue;
      const std::string reported =
          path_base.empty() ? fs::absolute(file).lexically_normal().generic_string() : relative_generic(file, path_base);
      const auto groups = subject_pattern.search(rel);
      if (!groups) {
        result.skips.push_back({modality, reported, "path does not match the subject pattern"});
        continue;
      }
      const auto date = normalize_date(groups->at("date"));
      const std::string& subject = groups->at("subject");
      if (subject.empty() || !date) {
        result.skips.push_back({modality, reported, "unusable subject or date '" + groups->at("date") + "'"});
        continue;
      }
      entries.push_back({{subject, *date}, reported});
    }
  }
  return result;
}

Manifest build_manifest(const std::map<Modality, std::vector<ScanEntry>>& scans, JoinPolicy policy,
                        std::vector<DuplicateNote>* notes) {
  Manifest m;
  m.columns = canonical_columns();

  std::map<SubjectKey, ManifestRow> rows;
  std::map<SubjectKey, std::size_t> seen_in;
  for (const auto& [mod, entries] : scans) {
    std::map<SubjectKey, std::vector<std::string>> by_key;
    for (const auto& e : entries) by_key[e.key].push_back(e.path);
    for (auto& [key, paths] : by_key) {
      std::sort(paths.begin(), paths.end());
      paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
      if (paths.size() > 1 && notes)
        notes->push_back({mod, key, paths.front(), std::vector<std::string>(paths.begin() + 1, paths.end())});
      auto& row = rows[key];
      row.key = key;
      row.paths[column_for(mod)] = paths.front();
      ++seen_in[key];
    }
  }
  for (auto& [key, row] : rows) {
    if (policy == JoinPolicy::INTERSECTION && seen_in[key] != scans.size()) continue;
    m.rows.push_back(std::move(row));
  }
  if (notes)
    std::sort(notes->begin(), notes->end(), [](const DuplicateNote& a, const DuplicateNote& b) {
      return std::tie(a.key, a.modality) < std::tie(b.key, b.modality);
    });
  return m;
}

std::string to_csv(const Manifest& m) {
  std::vector<csv::Row> rows{m.columns};
  for (const auto& r : m.rows) {
    csv::Row out;
    for (const auto& col : m.columns) {
      if (col == "SubjectID") out.push_back(r.key.subject_id);
      else if (col == "Date") out.push_back(r.key.date);
      else {
        const auto it = r.paths.find(col);
        out.push_back(it == r.paths.end() ? "" : it->second);
      }
    }
    rows.push_back(std::move(out));
  }
  return csv::emit(rows);
}

void emit_csv(const Manifest& m, const fs::path& path, const fs::path& path_base) {
  for (const auto& r : m.rows)
    for (const auto& [col, p] : r.paths) {
      if (p.empty()) continue;
      const fs::path resolved = path_base.empty() ? fs::path(p) : path_base / p;
      if (!fs::exists(resolved))
        throw IoError("manifest cell " + r.key.subject_id + "/" + r.key.date + "/" + col + " points at missing file " + p);
    }
  write_file_atomic(path, to_csv(m));
}

Manifest parse_manifest_csv(std::string_view text) {
  const auto aliases = ColumnAliases::load_default();
  const auto table = csv::parse_table(text);
  Manifest m;
  for (const auto& h : table.header) m.columns.push_back(aliases.canonicalize(h));
  const auto subject = std::find(m.columns.begin(), m.columns.end(), "SubjectID");
  const auto date = std::find(m.columns.begin(), m.columns.end(), "Date");
  if (subject == m.columns.end() || date == m.columns.end())
    throw ConfigError("manifest CSV lacks SubjectID or Date column");
  const auto si = static_cast<std::size_t>(subject - m.columns.begin());
  const auto di = static_cast<std::size_t>(date - m.columns.begin());
  for (const auto& row : table.rows) {
    if (row.size() != m.columns.size()) throw ConfigError("manifest CSV row has " + std::to_string(row.size()) + " fields");
    ManifestRow r;
    r.key = {row[si], row[di]};
    for (std::size_t c = 0; c < row.size(); ++c)
      if (c != si && c != di && !row[c].empty()) r.paths[m.columns[c]] = row[c];
    m.rows.push_back(std::move(r));
  }
  return m;
}

ColumnAliases ColumnAliases::parse(std::string_view text) {
  ColumnAliases a;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError("column alias line " + std::to_string(lineno) + " lacks a tab");
    const auto canonical = trim(line.substr(tab + 1));
    const auto& canon = canonical_columns();
    if (std::find(canon.begin(), canon.end(), canonical) == canon.end())
      throw ConfigError("column alias line " + std::to_string(lineno) + ": unknown canonical column " + canonical);
    a.aliases_[to_lower(trim(line.substr(0, tab)))] = canonical;
  }
  for (const auto& c : canonical_columns()) a.aliases_.emplace(to_lower(c), c);
  return a;
}

ColumnAliases ColumnAliases::load(const fs::path& path) { return parse(read_file(path)); }

ColumnAliases ColumnAliases::load_default() {
  static const ColumnAliases table = load(default_data_dir() / "column_aliases.tsv");
  return table;
}

std::string ColumnAliases::canonicalize(std::string_view column) const {
  const auto it = aliases_.find(to_lower(trim(column)));
  return it == aliases_.end() ? std::string(column) : it->second;
}

csv::Table canonicalize_table(csv::Table table, const ColumnAliases& aliases) {
  for (auto& h : table.header) h = aliases.canonicalize(h);
  std::sort(table.rows.begin(), table.rows.end());
  return table;
}

IntegrateResult run_integration(const IntegrateOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("integration needs an output directory");
  if (opts.roots.empty()) throw ConfigError("integration needs at least one modality root");
  const NamedRegex pattern(opts.subject_pattern);
  auto scan = scan_outputs(opts.roots, pattern, opts.path_base);
  IntegrateResult result;
  result.manifest = build_manifest(scan.entries, opts.join, &result.duplicates);
  result.skips = std::move(scan.skips);
  fs::create_directories(opts.out_dir);
  emit_csv(result.manifest, opts.out_dir / kManifestFile, opts.path_base);

  std::string notes;
  for (const auto& d : result.duplicates)
    notes += json{{"message", "duplicate " + std::string(neuroflow::to_string(d.modality)) + " entries for " +
                                  d.key.subject_id + " " + d.key.date + "; kept " + d.kept},
                  {"modality", neuroflow::to_string(d.modality)},
                  {"subject_id", d.key.subject_id},
                  {"date", d.key.date},
                  {"kept", d.kept},
                  {"dropped", d.dropped}}
                 .dump() +
             "\n";
  for (const auto& s : result.skips)
    notes += json{{"message", "skipped " + s.path + ": " + s.reason},
                  {"modality", neuroflow::to_string(s.modality)},
                  {"path", s.path},
                  {"reason", s.reason}}
                 .dump() +
             "\n";
  write_file_atomic(opts.out_dir / kNotesFile, notes);
  return result;
}

void write_task_spec(DownstreamTask task, const fs::path& manifest_csv, const fs::path& out_dir) {
  const auto m = parse_manifest_csv(read_file(manifest_csv));
  json coverage = json::object();
  for (const auto& col : m.columns) {
    if (col == "SubjectID" || col == "Date") continue;
    coverage[col] = std::count_if(m.rows.begin(), m.rows.end(), [&](const ManifestRow& r) { return r.paths.contains(col); });
  }
  std::set<std::string> subjects;
  for (const auto& r : m.rows) subjects.insert(r.key.subject_id);
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "task.json", json{{"task", neuroflow::to_string(task)},
                                                {"manifest", fs::absolute(manifest_csv).lexically_normal().string()},
                                                {"rows", m.rows.size()},
                                                {"subjects", subjects.size()},
                                                {"columns", m.columns},
                                                {"coverage", coverage}}
                                               .dump(2) +
                                               "\n");
}

}  // namespace neuroflow::integrator
