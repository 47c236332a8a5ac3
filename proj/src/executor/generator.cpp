// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/executor/generator.hpp"

#include "neuroflow/common/io.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace neuroflow::executor {

toolkit::ParamMap effective_params(const toolkit::ToolAdapter& tool, const graph::StepNode& step,
                                   const AttemptContext& ctx) {
  toolkit::ParamMap params = tool.default_params;
  for (const auto& [k, v] : step.params) params[k] = v;
  if (ctx.attempt_index >= 2 && ctx.prior_error && !tool.fallback_ladder.empty()) {
    const auto rung = std::min<std::size_t>(static_cast<std::size_t>(ctx.attempt_index - 2), tool.fallback_ladder.size() - 1);
    for (const auto& [k, v] : tool.fallback_ladder[rung]) params[k] = v;
  }
  return params;
}

std::string expand_placeholders(const std::string& tmpl, const PlaceholderLookup& lookup) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '{') {
      out += tmpl[i++];
      continue;
    }
    const auto close = tmpl.find('}', i);
    std::size_t name_end = i + 1;
    while (name_end < tmpl.size() && (std::islower(static_cast<unsigned char>(tmpl[name_end])) || tmpl[name_end] == '_'))
      ++name_end;
    const bool is_placeholder = close != std::string::npos && name_end > i + 1 &&
                                (tmpl[name_end] == '}' || tmpl[name_end] == ':');
    if (!is_placeholder) {
      out += tmpl[i++];
      continue;
    }
    const std::string name = tmpl.substr(i + 1, name_end - i - 1);
    const std::string arg = tmpl[name_end] == ':' ? tmpl.substr(name_end + 1, close - name_end - 1) : "";
    const auto words = lookup(name, arg);
    if (!words)
      throw GenerationError("unresolved placeholder {" + name + (arg.empty() ? "" : ":" + arg) + "}");
    std::string joined;
    for (const auto& w : *words) joined += (joined.empty() ? "" : " ") + shell_quote(w);
    out += joined;
    i = close + 1;
  }
  return out;
}

namespace {

std::string qualify(const graph::StepNode& step, const std::string& ref) {
  if (ref.find('.') != std::string::npos) return ref;
  if (!step.modality) throw GenerationError("step reference '" + ref + "' must be qualified in " + step.step_id);
  return std::string(step_prefix(*step.modality)) + "." + ref;
}

std::string format_double(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string render_command(const GenerationEnv& env, const graph::StepNode& step, const toolkit::ParamMap& params) {
  const auto& catalog = *env.catalog;
  const auto& tool = catalog.tool(step.tool_id);
  const fs::path workspace = env.workspace_of(step.step_id);

  auto lookup = [&](const std::string& name, const std::string& arg) -> std::optional<std::vector<std::string>> {
    using Words = std::vector<std::string>;
    if (name == "tool" && arg.empty()) {
      if (const auto it = env.tool_paths.find(step.tool_id); it != env.tool_paths.end()) return Words{it->second.string()};
      if (env.tool_paths.empty()) {
        const auto found = find_executable(tool.binary);
        if (!found.empty()) return Words{found.string()};
      }
      return std::nullopt;
    }
    if (name == "runner" && arg.empty()) return Words{env.runner.string()};
    if (name == "out" && arg.empty()) return Words{(workspace / "out").string()};
    if (name == "workspace" && arg.empty()) return Words{workspace.string()};
    if (name == "data_root" && arg.empty()) {
      if (env.data_root.empty()) return std::nullopt;
      return Words{env.data_root.string()};
    }
    if (name == "modality" && arg.empty()) {
      if (!step.modality) return std::nullopt;
      return Words{std::string(to_string(*step.modality))};
    }
    if (name == "task" && arg.empty()) {
      if (!step.task) return std::nullopt;
      return Words{std::string(to_string(*step.task))};
    }
    if (name == "param") {
      const auto it = params.find(arg);
      if (it == params.end()) return std::nullopt;
      return Words{it->second};
    }
    if (name == "in") {
      const auto out = env.upstream_out(qualify(step, arg));
      if (!out) return std::nullopt;
      return Words{out->string()};
    }
    if (name == "ctx") {
      if (!env.dataset) return std::nullopt;
      if (arg == "total_readout_time") {
        const auto v = env.dataset->total_readout_time();
        if (!v) return std::nullopt;
        return Words{format_double(*v)};
      }
      if (arg == "reverse_pe_b0") return Words{env.dataset->reverse_pe_b0() ? "true" : "false"};
      if (arg == "phase_encoding_direction") {
        for (const auto& s : env.dataset->subjects)
          if (!s.phase_encoding_direction.empty()) return Words{s.phase_encoding_direction};
      }
      return std::nullopt;
    }
    if (name == "manifest_roots" && arg.empty()) {
      Words words;
      for (Modality m : kAllModalities) {
        if (!catalog.covers(m)) continue;
        const auto& source = catalog.modality(m).manifest;
        const auto out = env.upstream_out(std::string(step_prefix(m)) + "." + source.step_name);
        if (!out) continue;
        words.push_back("--root");
        words.push_back(std::string(to_string(m)) + "=" + out->string());
        words.push_back("--pattern");
        words.push_back(std::string(to_string(m)) + "=" + source.pattern);
      }
      if (words.empty()) return std::nullopt;
      return words;
    }
    return std::nullopt;
  };
  return expand_placeholders(tool.command_template, lookup);
}

std::string script_text(const graph::StepNode& step, const std::string& command) {
  return "#!/bin/sh\n# step: " + step.step_id + " (tool " + step.tool_id + ")\nset -e\n" + command + "\n";
}

std::string listing(const fs::path& dir, std::size_t limit) {
  std::vector<std::string> entries;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (it->is_regular_file()) entries.push_back(relative_generic(it->path(), dir));
  }
  std::sort(entries.begin(), entries.end());
  std::string out;
  for (std::size_t i = 0; i < entries.size() && i < limit; ++i) out += "  " + entries[i] + "\n";
  if (entries.size() > limit) out += "  ... (" + std::to_string(entries.size() - limit) + " more)\n";
  return out;
}

}  // namespace

Artifact TemplateGenerator::generate(const graph::StepNode& step, const AttemptContext& ctx) {
  if (!env_.catalog) throw GenerationError("no template catalog");
  const auto& tool = env_.catalog->tool(step.tool_id);
  Artifact a;
  a.params = effective_params(tool, step, ctx);
  a.interpreter = tool.interpreter;
  a.text = script_text(step, render_command(env_, step, a.params));
  return a;
}

std::vector<planner::ChatMessage> ModelGenerator::build_messages(const graph::StepNode& step,
                                                                 const AttemptContext& ctx,
                                                                 const std::string& reference_script) const {
  std::ostringstream user;
  user << "Step: " << step.step_id << "\nTool: " << step.tool_id << "\nAttempt: " << ctx.attempt_index << "\n\n";
  user << "Reference invocation:\n```sh\n" << reference_script << "```\n\n";
  for (const auto& dep : step.depends_on) {
    const auto out = env_.upstream_out(dep);
    if (!out) continue;
    user << "Files produced by " << dep << " (" << out->string() << "):\n" << listing(*out, 40) << "\n";
  }
  if (ctx.prior_error) user << "The previous attempt failed with:\n" << *ctx.prior_error << "\n\n";
  if (ctx.prior_validation_feedback)
    user << "The previous attempt ran but its outputs were rejected:\n" << *ctx.prior_validation_feedback << "\n\n";
  user << "Reply with one POSIX sh script in a fenced code block.";
  return {{"system",
           "You write POSIX sh scripts that run exactly one neuroimaging pipeline step. Write outputs only "
           "under the step's out/ directory. When a previous attempt failed, change what caused the failure."},
          {"user", user.str()}};
}

Artifact ModelGenerator::generate(const graph::StepNode& step, const AttemptContext& ctx) {
  if (!env_.catalog) throw GenerationError("no template catalog");
  const auto& tool = env_.catalog->tool(step.tool_id);
  Artifact a;
  a.params = effective_params(tool, step, ctx);
  a.interpreter = tool.interpreter;
  const std::string reference = script_text(step, render_command(env_, step, a.params));
  planner::ChatReply reply;
  try {
    reply = backend_->complete(build_messages(step, ctx, reference));
  } catch (const planner::TransportError& e) {
    throw GenerationError(std::string("model backend: ") + e.what());
  }
  a.usage = reply.usage;
  a.text = extract_script(reply.text);
  if (trim(a.text).empty()) throw GenerationError("model returned an empty script");
  return a;
}

std::string extract_script(const std::string& reply) {
  const auto open = reply.find("```");
  if (open == std::string::npos) return reply;
  const auto body = reply.find('\n', open);
  if (body == std::string::npos) return reply;
  const auto close = reply.find("```", body + 1);
  return reply.substr(body + 1, close == std::string::npos ? std::string::npos : close - body - 1);
}

}  // namespace neuroflow::executor
