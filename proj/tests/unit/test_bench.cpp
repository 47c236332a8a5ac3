// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/bench/bench.hpp"
#include "neuroflow/bench/metrics.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/common/random.hpp"
#include "support/temp_dir.hpp"

#include <doctest.h>

#include <algorithm>

using namespace neuroflow;
using namespace neuroflow::bench;
using integrator::SubjectKey;

namespace {

const toolkit::TemplateCatalog& catalog() {
  static const auto c = toolkit::TemplateCatalog::load_default();
  return c;
}

class FixedBackend : public planner::ChatBackend {
 public:
  explicit FixedBackend(std::string reply) : reply_(std::move(reply)) {}
  planner::ChatReply complete(const std::vector<planner::ChatMessage>&) override { return {reply_, {10, 5}}; }
  std::string id() const override { return "fixed"; }

 private:
  std::string reply_;
};

class FixedScript : public ScriptSource {
 public:
  explicit FixedScript(std::string text) : text_(std::move(text)) {}
  std::string generate(const PreprocCase&) override { return text_; }
  std::string id() const override { return "fixed"; }

 private:
  std::string text_;
};

/// Writes a prepared manifest text instead of integrating anything.
class FixedManifest : public IntegrationSource {
 public:
  std::string text;
  void produce(const IntegrationCase&, const fs::path&, const fs::path& out_dir) override {
    write_file(out_dir / integrator::kManifestFile, text);
  }
  std::string id() const override { return "fixed"; }
};

PreprocCase simple_case() {
  PreprocCase c;
  c.case_id = "c1";
  c.label = "smri.recon_all";
  c.directory_tree = {"/data/study/rawdata/sub-01/ses-01/anat/sub-01_ses-01_T1w.nii.gz"};
  c.expected_tool_tokens = {"from nipype.interfaces.freesurfer import ReconAll", "ReconAll("};
  c.expected_output_root = "/data/study/derivatives/freesurfer";
  c.syntax_check_cmd = {"python3", "-m", "py_compile", "{script}"};
  return c;
}

const std::string kGoodScript =
    "from nipype.interfaces.freesurfer import ReconAll\n"
    "T1_FILE = \"/data/study/rawdata/sub-01/ses-01/anat/sub-01_ses-01_T1w.nii.gz\"\n"
    "SUBJECTS_OUTPUT_DIR = \"/data/study/derivatives/freesurfer\"\n"
    "ReconAll(T1_files=[T1_FILE], subjects_dir=SUBJECTS_OUTPUT_DIR).run()\n";

std::set<SubjectKey> keys(std::initializer_list<std::pair<const char*, const char*>> ks) {
  std::set<SubjectKey> out;
  for (const auto& [s, d] : ks) out.insert({s, d});
  return out;
}

}  // namespace

TEST_CASE("rule-based backend scores the bundled intent suite perfectly") {
  const auto cases = load_intent_cases(default_cases_dir(Suite::INTENT));
  REQUIRE(cases.size() == 18);
  const auto r = run_intent_bench(cases, planner::BackendConfig{});
  CHECK(r.aggregate("JointEM") == 1.0);
  CHECK(r.aggregate("ModalityEM") == 1.0);
  CHECK(r.aggregate("TaskEM") == 1.0);
  CHECK(r.aggregate("Invalid") == 0.0);
  CHECK(r.backend_id == "rule_based");
}

TEST_CASE("intent exact match is set equality; invalid parses score zero") {
  IntentCase both{"c", "p", {Modality::SMRI, Modality::PET}, {DownstreamTask::CLASSIFICATION}};
  FixedBackend same(R"({"modalities": ["PET", "SMRI"], "tasks": ["CLASSIFICATION"]})");
  auto r = run_intent_bench({both}, same, 3);
  CHECK(r.value("c", "ModalityEM") == 1.0);
  CHECK(r.value("c", "JointEM") == 1.0);

  FixedBackend fewer(R"({"modalities": ["SMRI"], "tasks": ["CLASSIFICATION"]})");
  r = run_intent_bench({both}, fewer, 3);
  CHECK(r.value("c", "ModalityEM") == 0.0);
  CHECK(r.value("c", "TaskEM") == 1.0);
  CHECK(r.value("c", "JointEM") == 0.0);

  FixedBackend garbage("I cannot answer that.");
  r = run_intent_bench({both}, garbage, 3);
  CHECK(r.value("c", "Invalid") == 1.0);
  for (const char* em : {"ModalityEM", "TaskEM", "JointEM"}) CHECK(r.value("c", em) == 0.0);
}

TEST_CASE("template generator passes every bundled preprocessing case") {
  const auto cases = load_preproc_cases(default_cases_dir(Suite::PREPROC));
  REQUIRE(cases.size() == 33);
  std::set<std::string> labels;
  for (const auto& c : cases) labels.insert(c.label);
  CHECK(labels.size() == 11);
  TemplateScriptSource source(catalog());
  const auto r = run_preproc_bench(cases, source);
  for (const auto& c : r.cases) CHECK_MESSAGE(c.values.back() == 1.0, c.case_id, ": ", c.detail);
  CHECK(r.aggregate("AllPass") == 1.0);
}

TEST_CASE("integrator passes every bundled integration case") {
  const auto cases = load_integration_cases(default_cases_dir(Suite::INTEGRATION));
  REQUIRE(cases.size() == 8);
  IntegratorSource source;
  const auto r = run_integration_bench(cases, source);
  for (const auto& c : r.cases) CHECK_MESSAGE(c.values.back() == 1.0, c.case_id, ": ", c.detail);
  CHECK(r.aggregate("AllPass") == 1.0);
  CHECK(r.aggregate("F1") == 1.0);
}

TEST_CASE("corrupted variants flip exactly the intended check") {
  TemplateScriptSource scripts(catalog());
  const auto base_pre = run_preproc_bench(load_preproc_cases(default_cases_dir(Suite::PREPROC)), scripts);
  const auto bad_pre_cases = load_preproc_cases(default_corrupted_dir(Suite::PREPROC));
  const auto bad_pre = run_preproc_bench(bad_pre_cases, scripts);

  IntegratorSource integ;
  const auto base_int = run_integration_bench(load_integration_cases(default_cases_dir(Suite::INTEGRATION)), integ);
  const auto bad_int_cases = load_integration_cases(default_corrupted_dir(Suite::INTEGRATION));
  const auto bad_int = run_integration_bench(bad_int_cases, integ);

  std::set<std::string> intended;
  for (const auto& c : bad_pre_cases) {
    REQUIRE(c.corruption);
    const auto o = check_corruption(base_pre, bad_pre, c.case_id, *c.corruption);
    CHECK_MESSAGE(o.ok, c.case_id, ": ", bad_pre.result(c.case_id).detail);
    CHECK(std::find(o.changed.begin(), o.changed.end(), c.corruption->expect_false) != o.changed.end());
    CHECK(o.changed.size() == 2);  // the intended check and AllPass
    intended.insert(c.corruption->expect_false);
  }
  for (const auto& c : bad_int_cases) {
    REQUIRE(c.corruption);
    const auto o = check_corruption(base_int, bad_int, c.case_id, *c.corruption);
    CHECK_MESSAGE(o.ok, c.case_id, ": ", bad_int.result(c.case_id).detail);
    intended.insert(c.corruption->expect_false);
  }
  CHECK(intended == std::set<std::string>{"Tool", "InPath", "StepConst", "DuplicateFree", "ColCompleteness"});
}

TEST_CASE("subject-date F1 examples and identities") {
  const auto half = pair_f1(keys({{"S1", "d1"}, {"S2", "d2"}}), keys({{"S1", "d1"}, {"S3", "d3"}}));
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);
  CHECK(pair_f1(keys({{"S1", "d1"}}), keys({{"S2", "d2"}})).f1 == 0.0);
  CHECK(pair_f1({}, keys({{"S2", "d2"}})).f1 == 0.0);
  CHECK(pair_f1(keys({{"S1", "d1"}}), keys({{"S1", "d1"}})).perfect());

  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<SubjectKey> a, b;
    for (int i = 0; i < 6; ++i) {
      if (rng.uniform() < 0.5) a.insert({"S" + std::to_string(i), "d"});
      if (rng.uniform() < 0.5) b.insert({"S" + std::to_string(i), "d"});
    }
    std::vector<SubjectKey> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    const double p = a.empty() ? 0.0 : double(both.size()) / double(a.size());
    const double r = b.empty() ? 0.0 : double(both.size()) / double(b.size());
    const double f1 = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
    CHECK(pair_f1(a, b).f1 == doctest::Approx(f1).epsilon(1e-15));
  }
}

TEST_CASE("RowEM implies F1, completeness and duplicate freedom") {
  testing::TempDir tmp;
  const std::string gold_text =
      "SubjectID,Date,sMRI_path,PET_path\n"
      "S1,2021-01-01,smri/a.nii,pet/a.nii\n"
      "S2,2021-02-02,smri/b.nii,\n"
      "S3,2021-03-03,,pet/c.nii\n";
  write_file(tmp / "gold.csv", gold_text);
  const nlohmann::json doc = {
      {"case_id", "prop"},
      {"simulated_tree", {"smri/a.nii", "pet/a.nii", "smri/b.nii", "pet/c.nii"}},
      {"config", {{"roots", {{"SMRI", {{"dir", "smri"}, {"pattern", "*.nii"}}}}}}},
      {"gold_csv", "gold.csv"},
      {"required_triples",
       {{"S1", "2021-01-01", "sMRI_path"}, {"S1", "2021-01-01", "PET_path"}, {"S2", "2021-02-02", "sMRI_path"},
        {"S3", "2021-03-03", "PET_path"}}}};
  const auto c = integration_case_from_json(doc, tmp.path());

  Rng rng(31);
  FixedManifest source;
  int row_em_seen = 0;
  for (int trial = 0; trial < 120; ++trial) {
    auto rows = csv::parse(gold_text);
    const auto op = rng.index(6);
    const auto target = 1 + rng.index(rows.size() - 1);
    if (op == 1) rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(target));
    if (op == 2) rows.push_back(rows[target]);
    if (op == 3) rows[target][2 + rng.index(2)] = "smri/zzz.nii";
    if (op == 4) rows.push_back({"S9", "2021-09-09", "", ""});
    if (op == 5) std::swap(rows[1], rows[rows.size() - 1]);
    source.text = csv::emit(rows);
    const auto r = run_integration_bench({c}, source).cases.front();
    if (r.values[0] == 1.0) {
      ++row_em_seen;
      CHECK(r.values[1] == 1.0);
      CHECK(r.values[3] == 1.0);
      CHECK(r.values[4] == 1.0);
    }
    CHECK((r.values[5] == 1.0) ==
          (r.values[0] == 1.0 && r.values[1] == 1.0 && r.values[2] == 1.0 && r.values[3] == 1.0 && r.values[4] == 1.0));
  }
  CHECK(row_em_seen > 0);

  source.text = "SubjectID,Date,sMRI_path\nS1,2021-01-01,smri/a.nii\nS1,2021-01-01,smri/a.nii\n";
  CHECK(run_integration_bench({c}, source).cases.front().values[4] == 0.0);
}

TEST_CASE("path literal extraction and grounding") {
  const std::string script =
      "\"\"\"Docstring with /not/a/path.\"\"\"\n"
      "import os  # see /etc/comment\n"
      "IN_FILE = \"/data/x/in.nii\"\n"
      "OUTPUT_DIR = '/data/out'\n"
      "FRAMES = [\"/data/x/f1.nii\",\n"
      "          \"/data/x/f2.nii\"]\n"
      "name = f\"{OUTPUT_DIR}/sub.nii\"\n"
      "label = \"no-slash\"\n"
      "out_path = os.path.join(OUTPUT_DIR, \"a/b\")\n";
  const auto lits = extract_path_literals(script);
  REQUIRE(lits.size() == 5);
  CHECK(lits[0].text == "/data/x/in.nii");
  CHECK_FALSE(lits[0].is_output);
  CHECK(lits[1].text == "/data/out");
  CHECK(lits[1].is_output);
  CHECK(lits[3].text == "/data/x/f2.nii");
  CHECK(lits[3].line == 6);
  CHECK_FALSE(lits[3].is_output);
  CHECK(lits[4].text == "a/b");
  CHECK(lits[4].is_output);

  const std::vector<std::string> listing{"/data/adni/rawdata/sub-1/anat/t1.nii", "/data/adni/code/x.txt"};
  CHECK(grounded_in("/data/adni/rawdata/sub-1/anat/t1.nii", listing));
  CHECK(grounded_in("/data/adni/rawdata/sub-1", listing));
  CHECK(grounded_in("/data/adni/rawdata/sub-1/", listing));
  CHECK_FALSE(grounded_in("/data/ad", listing));
  CHECK_FALSE(grounded_in("/tmp/elsewhere/input.nii", listing));
  CHECK(under_root("/out/a/b.nii", "/out/a"));
  CHECK(under_root("/out/a", "/out/a/"));
  CHECK_FALSE(under_root("/out/ab/c", "/out/a"));
}

TEST_CASE("preprocessing checks on hand-written scripts") {
  auto c = simple_case();
  c.constraints = validator::constraint_case_from_json(
      nlohmann::json::array({{{"kind", "REQUIRED_SUBSTRING"}, {"value", "dicom_dirs.txt"}, {"label", "dicom"}}}));
  FixedScript good(kGoodScript);
  auto r = run_preproc_bench({c}, good);
  CHECK(r.value("c1", "Syntax") == 1.0);
  CHECK(r.value("c1", "Tool") == 1.0);
  CHECK(r.value("c1", "InPath") == 1.0);
  CHECK(r.value("c1", "OutPath") == 1.0);
  CHECK(r.value("c1", "StepConst") == 0.0);
  CHECK(r.value("c1", "AllPass") == 0.0);

  c.constraints = {};
  FixedScript elsewhere(kGoodScript + "EXTRA = \"/tmp/elsewhere/input.nii\"\n");
  r = run_preproc_bench({c}, elsewhere);
  CHECK(r.value("c1", "InPath") == 0.0);
  CHECK(r.value("c1", "OutPath") == 1.0);

  FixedScript broken(kGoodScript + "def oops(:\n");
  r = run_preproc_bench({c}, broken);
  CHECK(r.value("c1", "Syntax") == 0.0);
  CHECK(r.value("c1", "Tool") == 1.0);

  FixedScript no_output("from nipype.interfaces.freesurfer import ReconAll\nReconAll(\"/data/study/rawdata\")\n");
  r = run_preproc_bench({c}, no_output);
  CHECK(r.value("c1", "OutPath") == 0.0);

  FixedBackend model("Here you go:\n```python\n" + kGoodScript + "```\n");
  ModelScriptSource from_model(catalog(), std::make_shared<FixedBackend>(model));
  r = run_preproc_bench({c}, from_model);
  CHECK(r.value("c1", "AllPass") == 1.0);
  CHECK(from_model.build_messages(c).back().content.find(c.directory_tree.front()) != std::string::npos);
}

TEST_CASE("missing syntax checker refuses to start") {
  auto c = simple_case();
  c.syntax_check_cmd = {"no-such-parser-xyz", "{script}"};
  FixedScript good(kGoodScript);
  CHECK_THROWS_AS(run_preproc_bench({c}, good), ConfigError);
}

TEST_CASE("template instantiation placeholders") {
  auto c = simple_case();
  auto tool = catalog().tool("recon_all");
  tool.script_template = "A=\"${input:t1w}\"\nB=${inputs:t1w}\nC=\"${output_root}\"\nD=\"${subject}-${session}\"\n";
  tool.bench_inputs = {{"t1w", "*_T1w.nii*"}};
  CHECK(instantiate_script_template(tool, c) ==
        "A=\"/data/study/rawdata/sub-01/ses-01/anat/sub-01_ses-01_T1w.nii.gz\"\n"
        "B=[\"/data/study/rawdata/sub-01/ses-01/anat/sub-01_ses-01_T1w.nii.gz\"]\n"
        "C=\"/data/study/derivatives/freesurfer\"\nD=\"01-01\"\n");
  tool.script_template = "${series:t1w}";
  CHECK(instantiate_script_template(tool, c) ==
        "[(\"/data/study/rawdata/sub-01/ses-01/anat\", \"sub-01_ses-01_anat\")]");
  tool.script_template = "${input:missing}";
  CHECK_THROWS_AS(instantiate_script_template(tool, c), Error);
  tool.script_template = "${bogus}";
  CHECK_THROWS_AS(instantiate_script_template(tool, c), Error);
  CHECK_THROWS_AS(tool_for_label(catalog(), "smri.nope"), ConfigError);
  CHECK(tool_for_label(catalog(), "dmri.convert").tool_id == "dcm2niix");
}

TEST_CASE("reruns with deterministic sources are identical") {
  const auto intent = load_intent_cases(default_cases_dir(Suite::INTENT));
  CHECK(run_intent_bench(intent, planner::BackendConfig{}).cases ==
        run_intent_bench(intent, planner::BackendConfig{}).cases);
  const auto pre = load_preproc_cases(default_cases_dir(Suite::PREPROC));
  TemplateScriptSource scripts(catalog());
  CHECK(run_preproc_bench(pre, scripts).cases == run_preproc_bench(pre, scripts).cases);
  const auto integ = load_integration_cases(default_cases_dir(Suite::INTEGRATION));
  IntegratorSource source;
  CHECK(run_integration_bench(integ, source).cases == run_integration_bench(integ, source).cases);
}

TEST_CASE("reports: aggregates are means and files round-trip") {
  BenchReport r;
  r.suite = Suite::PREPROC;
  r.backend_id = "template";
  r.timestamp = "2026-01-02T03:04:05.678Z";
  r.checks = suite_checks(Suite::PREPROC);
  r.cases = {{"a", {1, 1, 1, 1, 1, 1}, ""}, {"b", {1, 0, 1, 1, 0, 0}, "x"}, {"c", {1, 1, 0, 1, 1, 0}, ""}};
  CHECK(r.aggregate("Syntax") == 1.0);
  CHECK(r.aggregate("Tool") == doctest::Approx(2.0 / 3.0));
  CHECK(r.aggregate("AllPass") == doctest::Approx(1.0 / 3.0));

  testing::TempDir tmp;
  const auto dir = write_report(r, tmp.path());
  CHECK(dir.filename() == "20260102T030405678Z");
  const auto back = report_from_json(nlohmann::json::parse(read_file(dir / "report.json")));
  CHECK(back.cases == r.cases);
  CHECK(back.timestamp == r.timestamp);
  const auto table = csv::parse_table(read_file(dir / "report.csv"));
  CHECK(table.header.front() == "case_id");
  CHECK(table.rows.back().front() == "MEAN");
  CHECK(table.rows.back()[table.column("Tool")] == "0.666667");
  CHECK(write_report(r, tmp.path()) != dir);

  const auto agg = csv::parse_table(aggregate_csv({r}));
  CHECK(agg.rows.size() == r.checks.size());
  CHECK(aggregate_text({r}).find("AllPass") != std::string::npos);
}

TEST_CASE("canonical tables and case loading errors") {
  const auto aliases = integrator::ColumnAliases::load_default();
  const auto t = canonical_table(csv::parse_table("PTID,EXAMDATE,MRI_path,extra\nS2,d,b,x\nS1,d,a,y\n"), aliases);
  CHECK(t.columns.size() == 8);
  CHECK(t.columns.back() == "extra");
  CHECK(t.rows.front() == csv::Row{"S1", "d", "a", "", "", "", "", "y"});
  CHECK(cell(t, "S2", "d", "sMRI_path") == "b");
  CHECK_FALSE(cell(t, "S3", "d", "sMRI_path"));
  CHECK_THROWS_AS(canonical_table(csv::parse_table("Date,sMRI_path\nd,a\n"), aliases), Error);
  CHECK_THROWS_AS(canonical_table(csv::parse_table("SubjectID,PTID,Date\na,b,c\n"), aliases), Error);

  CHECK_THROWS_AS(parse_suite("nope"), ConfigError);
  auto j = nlohmann::json::parse(read_file(default_cases_dir(Suite::PREPROC) / "smri_recon_all_01.json"));
  j["directory_tree"] = nlohmann::json::array();
  CHECK_THROWS_AS(preproc_case_from_json(j), ConfigError);

  testing::TempDir tmp;
  write_file(tmp / "gold.csv", "SubjectID,Date,sMRI_path\nS1,2021-01-01,a\n");
  nlohmann::json ic = {{"case_id", "x"},
                       {"simulated_tree", {"a"}},
                       {"config", {{"roots", {{"SMRI", {{"dir", "."}, {"pattern", "*"}}}}}}},
                       {"gold_csv", "gold.csv"},
                       {"required_triples", {{"S9", "2021-01-01", "sMRI_path"}}}};
  CHECK_THROWS_AS(integration_case_from_json(ic, tmp.path()), ConfigError);
  ic["required_triples"] = {{"S1", "2021-01-01", "sMRI_path"}};
  CHECK_NOTHROW(integration_case_from_json(ic, tmp.path()));
  ic["simulated_tree"] = {"../escape"};
  CHECK_THROWS_AS(integration_case_from_json(ic, tmp.path()), ConfigError);
}
