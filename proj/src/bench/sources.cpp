// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/bench/bench.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/executor/generator.hpp"
#include "neuroflow/executor/sandbox.hpp"
#include "neuroflow/integrator/manifest.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

namespace neuroflow::bench {

using nlohmann::json;

const toolkit::ToolAdapter& tool_for_label(const toolkit::TemplateCatalog& catalog, const std::string& label) {
  const auto dot = label.find('.');
  if (dot == std::string::npos) throw ConfigError("label must be <modality>.<step>: " + label);
  const auto prefix = label.substr(0, dot);
  const auto step = label.substr(dot + 1);
  for (Modality m : kAllModalities) {
    if (step_prefix(m) != prefix) continue;
    if (!catalog.covers(m)) break;
    for (const auto& s : catalog.modality(m).steps)
      if (s.name == step) return catalog.tool(s.tool_id);
  }
  throw ConfigError("no catalog step for label " + label);
}

namespace {

/// Body of a double-quoted Python string literal.
std::string py_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\' || c == '"') out += '\\';
    out += c;
  }
  return out;
}

std::string py_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", \"" : "\"") + py_escape(items[i]) + "\"";
  return out + "]";
}

std::optional<std::string> entity(const std::string& path, const std::string& key) {
  const std::regex re("(^|[/_])" + key + "-([A-Za-z0-9]+)");
  std::smatch m;
  if (std::regex_search(path, m, re)) return m[2].str();
  return std::nullopt;
}

std::vector<std::string> role_matches(const toolkit::ToolAdapter& tool, const PreprocCase& c, const std::string& role) {
  const auto it = tool.bench_inputs.find(role);
  if (it == tool.bench_inputs.end()) throw Error("tool " + tool.tool_id + " has no bench input role '" + role + "'");
  std::vector<std::string> out;
  for (const auto& p : c.directory_tree)
    if (::fnmatch(it->second.c_str(), p.c_str(), 0) == 0) out.push_back(p);
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no listing entry matches role '" + role + "' (" + it->second + ")");
  return out;
}

std::string parent_of(const std::string& p) {
  const auto slash = p.rfind('/');
  return slash == std::string::npos ? std::string{} : p.substr(0, slash);
}

std::string basename_of(const std::string& p) {
  const auto slash = p.rfind('/');
  return slash == std::string::npos ? p : p.substr(slash + 1);
}

}  // namespace

std::string instantiate_script_template(const toolkit::ToolAdapter& tool, const PreprocCase& c) {
  if (tool.script_template.empty()) throw Error("tool " + tool.tool_id + " has no script template");
  std::optional<std::string> subject, session;
  for (const auto& p : c.directory_tree) {
    subject = entity(p, "sub");
    session = entity(p, "ses");
    if (subject && session) break;
  }

  const std::string& t = tool.script_template;
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = t.find("${", pos);
    if (open == std::string::npos) break;
    const auto close = t.find('}', open);
    if (close == std::string::npos) throw Error("unterminated placeholder in template of " + tool.tool_id);
    out.append(t, pos, open - pos);
    const auto body = t.substr(open + 2, close - open - 2);
    const auto colon = body.find(':');
    const auto name = body.substr(0, colon);
    const auto arg = colon == std::string::npos ? std::string{} : body.substr(colon + 1);

    if (name == "output_root") {
      out += py_escape(c.expected_output_root);
    } else if (name == "subject" || name == "session") {
      const auto& v = name == "subject" ? subject : session;
      if (!v) throw Error("listing names no " + name);
      out += *v;
    } else if (name == "input") {
      out += py_escape(role_matches(tool, c, arg).front());
    } else if (name == "inputs") {
      out += py_list(role_matches(tool, c, arg));
    } else if (name == "series") {
      std::set<std::string> dirs;
      for (const auto& p : role_matches(tool, c, arg)) dirs.insert(parent_of(p));
      std::string list = "[";
      for (const auto& d : dirs) {
        const auto s = entity(d, "sub");
        const auto e = entity(d, "ses");
        if (!s || !e) throw Error("series directory lacks sub-/ses- entities: " + d);
        const auto bids = "sub-" + *s + "_ses-" + *e + "_" + basename_of(d);
        list += (list.size() > 1 ? ", (\"" : "(\"") + py_escape(d) + "\", \"" + py_escape(bids) + "\")";
      }
      out += list + "]";
    } else {
      throw Error("unknown placeholder ${" + body + "} in template of " + tool.tool_id);
    }
    pos = close + 1;
  }
  out.append(t, pos, std::string::npos);
  return out;
}

std::string TemplateScriptSource::generate(const PreprocCase& c) {
  return instantiate_script_template(tool_for_label(catalog_, c.label), c);
}

std::vector<planner::ChatMessage> ModelScriptSource::build_messages(const PreprocCase& c) const {
  const auto& tool = tool_for_label(catalog_, c.label);
  std::ostringstream user;
  user << "Write a Python script for the preprocessing step " << c.label << " using the " << tool.binary
       << " tool through its nipype interface.\n"
       << "Reference every input by its absolute path from the directory tree below.\n"
       << "Write every output below " << c.expected_output_root << ".\n"
       << "Assign output paths to variables whose names contain OUTPUT.\n\n"
       << "Directory tree:\n";
  for (const auto& p : c.directory_tree) user << p << "\n";
  return {{"system", "You write neuroimaging preprocessing scripts in Python. Reply with a single fenced code "
                     "block and nothing else."},
          {"user", user.str()}};
}

std::string ModelScriptSource::generate(const PreprocCase& c) {
  const auto reply = backend_->complete(build_messages(c));
  auto script = executor::extract_script(reply.text);
  if (trim(script).empty()) throw Error("model returned no script");
  return script;
}

void IntegratorSource::produce(const IntegrationCase& c, const fs::path& tree_root, const fs::path& out_dir) {
  integrator::IntegrateOptions opts;
  for (const auto& [m, root] : c.roots) opts.roots[m] = {tree_root / root.dir, root.pattern};
  opts.subject_pattern = c.subject_pattern;
  opts.join = c.join;
  opts.out_dir = out_dir;
  opts.path_base = tree_root;
  integrator::run_integration(opts);
}

std::vector<planner::ChatMessage> ModelIntegrationSource::build_messages(const IntegrationCase& c) const {
  std::ostringstream user;
  user << "Write a Python 3 script (standard library only) that builds a subject manifest CSV.\n"
       << "The working directory is the root of the tree below. Write the CSV to the path given as the "
          "first command-line argument.\n"
       << "Columns: SubjectID,Date,sMRI_path,PET_path,fMRI_path,DTI_path,Tabular_path. Dates are YYYY-MM-DD. "
          "Paths are relative to the working directory. One row per (SubjectID, Date); leave missing "
          "modalities empty.\n"
       << "Join: " << integrator::to_string(c.join) << ". Subject/date pattern: " << c.subject_pattern << "\n"
       << "Modality roots:\n";
  for (const auto& [m, root] : c.roots) user << "  " << to_string(m) << ": " << root.dir << "/" << root.pattern << "\n";
  user << "\nFiles:\n";
  for (const auto& f : c.simulated_tree) user << f << "\n";
  return {{"system", "You write small, correct data-wrangling scripts. Reply with a single fenced code block."},
          {"user", user.str()}};
}

void ModelIntegrationSource::produce(const IntegrationCase& c, const fs::path& tree_root, const fs::path& out_dir) {
  const auto reply = backend_->complete(build_messages(c));
  const auto script = executor::extract_script(reply.text);
  fs::create_directories(out_dir);
  const auto script_path = out_dir / "integrate.py";
  write_file(script_path, script);
  executor::SandboxSpec spec;
  spec.argv = {"python3", script_path.string(), (out_dir / integrator::kManifestFile).string()};
  spec.cwd = tree_root;
  spec.timeout_seconds = opts_.script_timeout_seconds;
  spec.stdout_log = out_dir / "stdout.log";
  spec.stderr_log = out_dir / "stderr.log";
  const auto r = executor::sandbox_exec(spec);
  if (r.exit_code != 0 || r.timed_out)
    throw Error("integration script failed (exit " + std::to_string(r.exit_code) + "): " + r.stderr_tail);
}

}  // namespace neuroflow::bench
