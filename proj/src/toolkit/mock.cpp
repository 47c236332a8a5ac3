// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/toolkit/mock.hpp"

#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/common/random.hpp"
#include "neuroflow/validator/nifti.hpp"
#include "neuroflow/validator/schema.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <thread>

namespace neuroflow::toolkit {

using nlohmann::json;

namespace {

MockContentKind parse_kind(const std::string& s) {
  const auto k = to_lower(s);
  if (k == "nifti") return MockContentKind::NIFTI;
  if (k == "text") return MockContentKind::TEXT;
  if (k == "csv") return MockContentKind::CSV;
  if (k == "bytes") return MockContentKind::BYTES;
  throw ConfigError("unknown mock content kind '" + s + "'");
}

std::string kind_name(MockContentKind k) {
  switch (k) {
    case MockContentKind::NIFTI: return "nifti";
    case MockContentKind::TEXT: return "text";
    case MockContentKind::CSV: return "csv";
    case MockContentKind::BYTES: return "bytes";
  }
  return "text";
}

MockOutput output_from_json(const json& j) {
  MockOutput o;
  o.path = j.at("path").get<std::string>();
  validator::check_relative_pattern(o.path);
  o.kind = parse_kind(j.value("kind", std::string("text")));
  o.dims = j.value("dims", o.dims);
  o.bytes = j.value("bytes", o.bytes);
  if (o.kind == MockContentKind::NIFTI && (o.dims.empty() || o.dims.size() > 7))
    throw ConfigError("mock output " + o.path + ": NIfTI needs 1 to 7 dims");
  if (j.contains("repeat")) {
    const auto& r = j.at("repeat");
    MockRepeat rep;
    const auto src = to_lower(r.value("source", std::string("in")));
    if (src == "in")
      rep.source = MockRepeat::Source::INPUT;
    else if (src == "data")
      rep.source = MockRepeat::Source::DATA;
    else
      throw ConfigError("mock repeat source must be 'in' or 'data'");
    rep.glob = r.at("glob").get<std::string>();
    if (r.contains("dim")) rep.dim = r.at("dim").get<int>();
    o.repeat = rep;
  }
  return o;
}

json output_to_json(const MockOutput& o) {
  json j{{"path", o.path}, {"kind", kind_name(o.kind)}, {"dims", o.dims}, {"bytes", o.bytes}};
  if (o.repeat) {
    j["repeat"] = {{"source", o.repeat->source == MockRepeat::Source::INPUT ? "in" : "data"},
                   {"glob", o.repeat->glob}};
    if (o.repeat->dim) j["repeat"]["dim"] = *o.repeat->dim;
  }
  return j;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

std::vector<std::string> list_files_relative(const fs::path& root) {
  std::vector<std::string> out;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return out;
  for (auto it = fs::recursive_directory_iterator(root, ec); it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    if (it->is_regular_file()) out.push_back(relative_generic(it->path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> matching(const fs::path& root, const std::string& glob) {
  std::vector<std::string> out;
  for (const auto& rel : list_files_relative(root))
    if (validator::glob_match(glob, rel)) out.push_back(rel);
  return out;
}

std::string index_label(std::size_t n) {
  std::ostringstream s;
  s << std::setw(3) << std::setfill('0') << n;
  return s.str();
}

void write_content(const fs::path& path, const MockOutput& spec, std::uint64_t seed) {
  Rng rng(seed);
  fs::create_directories(path.parent_path());
  switch (spec.kind) {
    case MockContentKind::NIFTI: {
      const auto header = validator::make_float32_header(spec.dims);
      std::size_t voxels = 1;
      for (int d : spec.dims) voxels *= static_cast<std::size_t>(d);
      std::vector<std::uint8_t> payload(voxels * sizeof(float));
      for (std::size_t i = 0; i < voxels; ++i) {
        const auto v = static_cast<float>(rng.normal());
        std::memcpy(payload.data() + i * sizeof(float), &v, sizeof(float));
      }
      validator::write_nifti(path, header, payload);
      return;
    }
    case MockContentKind::CSV: {
      const int n = spec.dims.empty() ? 4 : spec.dims.front();
      std::ostringstream s;
      s << std::fixed << std::setprecision(6);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) s << (c ? "," : "") << (r == c ? 1.0 : rng.uniform(-1.0, 1.0));
        s << '\n';
      }
      write_file(path, s.str());
      return;
    }
    case MockContentKind::TEXT: {
      std::ostringstream s;
      s << std::fixed << std::setprecision(6);
      std::size_t line = 0;
      while (static_cast<std::size_t>(s.tellp()) < spec.bytes) s << "value_" << line++ << ' ' << rng.uniform() << '\n';
      write_file(path, s.str());
      return;
    }
    case MockContentKind::BYTES: {
      std::string data(spec.bytes, '\0');
      for (auto& c : data) c = static_cast<char>(rng.next_u64() & 0xff);
      write_file(path, data);
      return;
    }
  }
}

/// Count of repetitions for an output within one unit.
std::size_t repeat_count(const MockRepeat& rep, const std::string& unit, const MockInvocation& inv) {
  fs::path base;
  if (rep.source == MockRepeat::Source::DATA) {
    if (inv.data_root.empty()) throw Error("repeat over data requires --data-root");
    base = inv.data_root / unit;
  } else {
    if (inv.inputs.empty()) throw Error("repeat over inputs requires --in");
    base = inv.inputs.front() / unit;
  }
  const auto matches = matching(base, rep.glob);
  if (!rep.dim) return matches.size();
  if (matches.empty()) throw Error("no file matching " + rep.glob + " under " + base.string());
  const auto header = validator::read_nifti_header(base / matches.front());
  const int d = *rep.dim;
  if (d < 1 || d > 7 || d > header.dim[0]) return 1;
  return static_cast<std::size_t>(std::max<int>(1, header.dim[d]));
}

std::vector<std::string> units_for(const MockInvocation& inv) {
  if (!inv.data_root.empty()) {
    std::vector<std::string> out;
    for (const auto& unit : find_units(inv.data_root))
      if (inv.glob.empty() || !matching(inv.data_root / unit, inv.glob).empty()) out.push_back(unit);
    return out;
  }
  if (!inv.inputs.empty()) return find_units(inv.inputs.front());
  return {};
}

}  // namespace

const std::vector<MockOutput>& MockBehavior::outputs_for(const std::string& modality) const {
  static const std::vector<MockOutput> kNone;
  auto it = outputs.find(to_upper(modality));
  if (it == outputs.end()) it = outputs.find("*");
  return it == outputs.end() ? kNone : it->second;
}

MockManifest MockManifest::from_json(const json& j) {
  MockManifest m;
  try {
    m.seed = j.value("seed", m.seed);
    for (const auto& [id, tj] : j.at("tools").items()) {
      MockBehavior b;
      b.exit_codes = tj.value("exit_codes", b.exit_codes);
      if (b.exit_codes.empty()) throw ConfigError("mock tool '" + id + "': exit_codes must be non-empty");
      b.sleep_seconds = tj.value("sleep", 0.0);
      b.stderr_message = tj.value("stderr", std::string{});
      b.omit = tj.value("omit", std::vector<std::string>{});
      b.requires_params = tj.value("requires_params", std::map<std::string, std::string>{});
      const auto& outs = tj.value("outputs", json::array());
      if (outs.is_array()) {
        for (const auto& o : outs) b.outputs["*"].push_back(output_from_json(o));
      } else {
        for (const auto& [mod, list] : outs.items())
          for (const auto& o : list) b.outputs[mod == "*" ? mod : to_upper(mod)].push_back(output_from_json(o));
      }
      m.tools[id] = std::move(b);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed mock manifest: ") + e.what());
  }
  return m;
}

MockManifest MockManifest::load(const fs::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse mock manifest " + path.string() + ": " + e.what());
  }
}

MockManifest MockManifest::load_default() { return load(default_data_dir() / "mock_manifest.json"); }

json MockManifest::to_json() const {
  json tools_json = json::object();
  for (const auto& [id, b] : tools) {
    json outs = json::object();
    for (const auto& [mod, list] : b.outputs) {
      json arr = json::array();
      for (const auto& o : list) arr.push_back(output_to_json(o));
      outs[mod] = arr;
    }
    tools_json[id] = {{"exit_codes", b.exit_codes},     {"sleep", b.sleep_seconds},
                      {"stderr", b.stderr_message},     {"omit", b.omit},
                      {"requires_params", b.requires_params}, {"outputs", outs}};
  }
  return {{"seed", seed}, {"tools", tools_json}};
}

const MockBehavior& MockManifest::behavior(const std::string& tool_id) const {
  const auto it = tools.find(tool_id);
  if (it == tools.end()) throw NotFoundError("mock manifest has no tool '" + tool_id + "'");
  return it->second;
}

std::map<std::string, fs::path> install_mock_suite(const MockManifest& manifest, const fs::path& dir,
                                                   const fs::path& runner) {
  fs::create_directories(dir);
  const fs::path manifest_path = fs::absolute(dir / "mock_manifest.json");
  write_file_atomic(manifest_path, manifest.to_json().dump(2));
  std::map<std::string, fs::path> stubs;
  for (const auto& [id, _] : manifest.tools) {
    const fs::path stub = fs::absolute(dir / id);
    write_file_atomic(stub, "#!/bin/sh\nexec " + shell_quote(fs::absolute(runner).string()) +
                                " mock-tool --manifest " + shell_quote(manifest_path.string()) + " --tool " +
                                shell_quote(id) + " -- \"$@\"\n");
    fs::permissions(stub, fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec |
                              fs::perms::others_read | fs::perms::others_exec);
    stubs[id] = stub;
  }
  return stubs;
}

MockInvocation parse_mock_args(const std::vector<std::string>& args) {
  MockInvocation inv;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    auto value = [&]() -> const std::string& {
      if (i + 1 >= args.size()) throw ConfigError("mock tool: " + a + " needs a value");
      return args[++i];
    };
    if (a == "--modality")
      inv.modality = value();
    else if (a == "--data-root")
      inv.data_root = value();
    else if (a == "--glob")
      inv.glob = value();
    else if (a == "--in")
      inv.inputs.emplace_back(value());
    else if (a == "--out")
      inv.out = value();
    else if (a == "--set") {
      const auto& kv = value();
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("mock tool: --set expects key=value, got " + kv);
      inv.params[kv.substr(0, eq)] = kv.substr(eq + 1);
    } else {
      throw ConfigError("mock tool: unknown argument " + a);
    }
  }
  if (inv.out.empty()) throw ConfigError("mock tool: --out is required");
  return inv;
}

std::vector<std::string> find_units(const fs::path& root) {
  std::vector<std::string> out;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return out;
  for (const auto& s : fs::directory_iterator(root, ec)) {
    if (!s.is_directory() || s.path().filename().string().rfind("sub-", 0) != 0) continue;
    std::error_code ec2;
    for (const auto& v : fs::directory_iterator(s.path(), ec2))
      if (v.is_directory() && v.path().filename().string().rfind("ses-", 0) == 0)
        out.push_back(s.path().filename().string() + "/" + v.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_mock_tool(const MockManifest& manifest, const std::string& tool_id, const std::vector<std::string>& args,
                  const fs::path& cwd, std::ostream& out, std::ostream& err) {
  const MockBehavior& behavior = manifest.behavior(tool_id);
  const MockInvocation inv = parse_mock_args(args);

  const fs::path counter = cwd / (".mock_attempt." + tool_id);
  int attempt = 1;
  if (fs::exists(counter)) attempt = std::stoi(trim(read_file(counter))) + 1;
  write_file_atomic(counter, std::to_string(attempt) + "\n");

  if (behavior.sleep_seconds > 0)
    std::this_thread::sleep_for(std::chrono::duration<double>(behavior.sleep_seconds));

  const int code = behavior.exit_codes[std::min<std::size_t>(attempt - 1, behavior.exit_codes.size() - 1)];
  if (code != 0) {
    err << "mock " << tool_id << ": scripted failure on attempt " << attempt << " (exit " << code << ")";
    if (!behavior.stderr_message.empty()) err << ": " << behavior.stderr_message;
    err << '\n';
    return code;
  }
  for (const auto& [key, want] : behavior.requires_params) {
    const auto it = inv.params.find(key);
    const std::string got = it == inv.params.end() ? "<unset>" : it->second;
    if (got != want) {
      err << "mock " << tool_id << ": " << key << "=" << got << " did not converge (needs " << key << "=" << want
          << ")\n";
      return 1;
    }
  }

  const auto units = units_for(inv);
  if (units.empty()) {
    err << "mock " << tool_id << ": no subject/session inputs found\n";
    return 2;
  }
  std::size_t written = 0;
  for (const auto& tmpl : behavior.outputs_for(inv.modality)) {
    if (std::find(behavior.omit.begin(), behavior.omit.end(), tmpl.path) != behavior.omit.end()) continue;
    const bool per_unit = tmpl.path.find("{unit}") != std::string::npos;
    for (const auto& unit : per_unit ? units : std::vector<std::string>{""}) {
      const std::string base = replace_all(tmpl.path, "{unit}", unit);
      const std::size_t count = tmpl.repeat ? repeat_count(*tmpl.repeat, unit, inv) : 1;
      for (std::size_t n = 0; n < count; ++n) {
        const std::string rel = replace_all(base, "{n}", index_label(n));
        const std::uint64_t seed = manifest.seed ^ fnv1a64(tool_id + "|" + rel);
        write_content(inv.out / rel, tmpl, seed);
        ++written;
      }
    }
  }
  out << "mock " << tool_id << ": attempt " << attempt << ", " << units.size() << " unit(s), " << written
      << " file(s)\n";
  return 0;
}

void make_synthetic_dataset(const fs::path& root, const SyntheticDatasetSpec& spec) {
  if (spec.subjects < 1) throw ConfigError("synthetic dataset needs at least one subject");
  if (spec.pet_frames < 1) throw ConfigError("synthetic dataset needs at least one PET frame");
  Rng rng(spec.seed);
  for (int s = 1; s <= spec.subjects; ++s) {
    char label[16];
    std::snprintf(label, sizeof label, "%03d", s);
    const std::string sub = std::string("sub-") + label;
    const bool reverse = std::find(spec.reverse_pe_subjects.begin(), spec.reverse_pe_subjects.end(), s) !=
                         spec.reverse_pe_subjects.end();
    for (const auto& date : spec.session_dates) {
      const std::string ses = "ses-" + date;
      const fs::path dir = root / sub / ses;
      const std::string stem = sub + "_" + ses;
      auto dicom = [&](const fs::path& p) {
        std::string bytes(128, '\0');
        for (auto& c : bytes) c = static_cast<char>(rng.next_u64() & 0xff);
        write_file(p, bytes + "DICM");
      };
      if (spec.modalities.contains(Modality::SMRI)) dicom(dir / "anat" / (stem + "_T1w.dcm"));
      if (spec.modalities.contains(Modality::FMRI)) dicom(dir / "func" / (stem + "_task-rest_bold.dcm"));
      if (spec.modalities.contains(Modality::DMRI)) {
        dicom(dir / "dwi" / (stem + "_dir-AP_dwi.dcm"));
        write_file(dir / "dwi" / (stem + "_dir-AP_dwi.json"),
                   json{{"PhaseEncodingDirection", "j"}, {"TotalReadoutTime", 0.0665}}.dump(2));
        if (reverse)
          write_file(dir / "fmap" / (stem + "_dir-PA_epi.json"),
                     json{{"PhaseEncodingDirection", "j-"}, {"TotalReadoutTime", 0.0665}}.dump(2));
      }
      if (spec.modalities.contains(Modality::PET)) {
        const int shape[4] = {8, 8, 8, spec.pet_frames};
        const auto header = validator::make_float32_header(shape);
        std::vector<std::uint8_t> payload(static_cast<std::size_t>(8 * 8 * 8 * spec.pet_frames) * 4);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
        validator::write_nifti(dir / "pet" / (stem + "_trc-AV1451_pet.nii"), header, payload);
      }
      if (spec.modalities.contains(Modality::TABULAR)) {
        std::ostringstream csv;
        csv << "participant_id,age,sex,mmse\n"
            << sub << ',' << static_cast<int>(rng.uniform(60, 85)) << ',' << (rng.uniform() < 0.5 ? 'F' : 'M')
            << ',' << static_cast<int>(rng.uniform(20, 30)) << '\n';
        write_file(dir / "tabular" / (stem + "_clinical.csv"), csv.str());
      }
    }
  }
}

}  // namespace neuroflow::toolkit
