// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/executor/step_runner.hpp"

#include "neuroflow/common/io.hpp"

#include <algorithm>

namespace neuroflow::executor {

using nlohmann::json;

std::map<std::string, std::string> collect_outputs(const fs::path& out_dir, const fs::path& workflow_dir,
                                                   const validator::OutputSchema& schema) {
  std::map<std::string, std::string> outputs{{"out", relative_generic(out_dir, workflow_dir)}};
  std::vector<std::string> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(out_dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec))
    files.push_back(relative_generic(it->path(), out_dir));
  std::sort(files.begin(), files.end());
  for (const auto& pattern : schema.required_paths) {
    const auto hit = std::find_if(files.begin(), files.end(),
                                  [&](const auto& f) { return validator::glob_match(pattern, f); });
    if (hit != files.end()) outputs[pattern] = relative_generic(out_dir / *hit, workflow_dir);
  }
  return outputs;
}

namespace {

void reset_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::remove_all(out, ec);
  if (ec) throw IoError("cannot clear " + out.string() + ": " + ec.message());
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
}

std::string describe_failure(const ExecutionResult& r, double timeout) {
  std::string head;
  if (r.timed_out)
    head = "timed out after " + std::to_string(static_cast<long>(timeout)) + "s (killed, exit " +
           std::to_string(r.exit_code) + ")";
  else
    head = "exit code " + std::to_string(r.exit_code);
  return head + "\n" + r.stderr_tail;
}

}  // namespace

StepRunResult run_step(registry::Registry& reg, const ExecutionRequest& req, ScriptGenerator& gen,
                       const validator::OutputSchema& schema, int max_exec_retries, const std::atomic<bool>* cancel) {
  if (max_exec_retries < 0) throw ConfigError("max_exec_retries must be >= 0");
  const std::string& id = req.step.step_id;
  for (const auto& [dep, path] : req.resolved_inputs)
    if (!fs::exists(path)) throw IoError("input of " + id + " from " + dep + " is missing: " + path.string());
  fs::create_directories(req.workspace);

  const int budget = max_exec_retries + 1;
  StepRunResult result;
  const auto before = reg.step(id);
  int attempts = before.attempts;
  AttemptContext ctx{attempts + 1, std::nullopt, std::nullopt};
  if (attempts > 0 && before.last_error) ctx.prior_error = before.last_error;

  std::string last_failure = before.last_error.value_or("");
  while (attempts < budget) {
    result.contexts.push_back(ctx);
    json start_payload{{"attempt_index", ctx.attempt_index}};
    if (ctx.prior_error) start_payload["prior_error"] = *ctx.prior_error;
    if (ctx.prior_validation_feedback) start_payload["prior_validation_feedback"] = *ctx.prior_validation_feedback;
    attempts = reg.step_start(id, start_payload);
    result.attempts = attempts;

    const fs::path out = req.workspace / "out";
    reset_out_dir(out);

    AttemptContext next{attempts + 1, std::nullopt, std::nullopt};
    try {
      Artifact artifact = gen.generate(req.step, ctx);
      const fs::path artifact_path = req.workspace / "artifact";
      write_file(artifact_path, artifact.text);
      SandboxSpec spec;
      spec.argv = artifact.interpreter;
      spec.argv.push_back(artifact_path.string());
      spec.cwd = req.workspace;
      spec.env_allowlist = req.env_allowlist;
      spec.timeout_seconds = req.timeout_seconds;
      spec.stdout_log = req.workspace / "stdout.log";
      spec.stderr_log = req.workspace / "stderr.log";
      spec.cancel = cancel;
      const ExecutionResult exec = sandbox_exec(spec);
      reg.record_usage(id, artifact.usage, exec.wall_seconds);
      if (exec.cancelled) {
        result.outcome = StepOutcome::INTERRUPTED;
        return result;
      }
      if (exec.exit_code != 0 || exec.timed_out) {
        last_failure = describe_failure(exec, req.timeout_seconds);
        next.prior_error = last_failure;
      } else {
        const auto report = validator::validate_tree(out, schema);
        const auto report_json = validator::to_json(report);
        write_file(req.workspace / "validation.json", report_json.dump(2) + "\n");
        if (report.valid()) {
          reg.step_done(id, collect_outputs(out, req.workflow_dir, schema));
          result.outcome = StepOutcome::COMPLETED;
          return result;
        }
        reg.validation_fail(id, report.feedback, report_json);
        last_failure = report.feedback;
        next.prior_validation_feedback = report.feedback;
      }
    } catch (const GenerationError& e) {
      last_failure = std::string("generation error: ") + e.what();
      next.prior_error = last_failure;
    } catch (const SpawnError& e) {
      last_failure = std::string("spawn error: ") + e.what();
      next.prior_error = last_failure;
    }
    if (attempts < budget) reg.step_retry(id, last_failure, {{"attempt_index", attempts}});
    ctx = next;
  }

  const std::string reason = "step " + id + " failed after " + std::to_string(attempts) + " attempt(s); last error:\n" +
                             last_failure;
  result.approval_id = reg.open_approval(id, reason);
  result.outcome = StepOutcome::ESCALATED;
  return result;
}

}  // namespace neuroflow::executor
