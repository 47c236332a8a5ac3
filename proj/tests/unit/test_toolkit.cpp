// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/toolkit/catalog.hpp"
#include "neuroflow/toolkit/mock.hpp"
#include "neuroflow/validator/nifti.hpp"
#include "neuroflow/validator/schema.hpp"
#include "support/temp_dir.hpp"

#include <doctest.h>

#include <sstream>

using namespace neuroflow;
using namespace neuroflow::toolkit;

namespace {

const TemplateCatalog& catalog() {
  static const auto c = TemplateCatalog::load_default();
  return c;
}

std::vector<std::string> step_names(const std::vector<graph::StepNode>& nodes) {
  std::vector<std::string> out;
  for (const auto& n : nodes) out.push_back(n.step_id.substr(n.step_id.find('.') + 1));
  return out;
}

const graph::StepNode& find(const std::vector<graph::StepNode>& nodes, const std::string& id) {
  for (const auto& n : nodes)
    if (n.step_id == id) return n;
  FAIL("no node " << id);
  throw std::logic_error("unreachable");
}

DatasetContext with_reverse_pe(bool on) {
  DatasetContext ctx;
  ctx.subjects.push_back({"001", "20210315", "j-", 0.05, on});
  return ctx;
}

int invoke(const MockManifest& m, const std::string& tool, const std::vector<std::string>& args,
           const fs::path& cwd, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_mock_tool(m, tool, args, cwd, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

/// Runs every step of a modality chain through the mock suite, in template order, with one
/// workspace per step under `wf`. Returns step id -> out directory.
std::map<std::string, fs::path> run_chain(Modality modality, const fs::path& data_root, const fs::path& wf,
                                          const DatasetContext& ctx, const MockManifest& mocks) {
  std::map<std::string, fs::path> outs;
  const std::string mod{to_string(modality)};
  for (const auto& node : expand_template(modality, ctx, catalog())) {
    const fs::path ws = wf / node.step_id;
    fs::create_directories(ws / "out");
    std::vector<std::string> args{"--modality", mod, "--out", (ws / "out").string()};
    if (node.phase == graph::StepPhase::INGEST) {
      args.insert(args.end(), {"--data-root", data_root.string(), "--glob", node.params.at("source_glob")});
    }
    for (const auto& dep : node.depends_on)
      if (outs.contains(dep)) args.insert(args.end(), {"--in", outs.at(dep).string()});
    std::string err;
    REQUIRE_MESSAGE(invoke(mocks, node.tool_id, args, ws, &err) == 0, node.step_id, ": ", err);
    outs[node.step_id] = ws / "out";
  }
  return outs;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[relative_generic(e.path(), root)] = read_file(e.path());
  return files;
}

fs::path synthetic(const fs::path& root, int subjects, std::vector<int> reverse_pe = {}, int frames = 4) {
  SyntheticDatasetSpec spec;
  spec.subjects = subjects;
  spec.reverse_pe_subjects = std::move(reverse_pe);
  spec.pet_frames = frames;
  make_synthetic_dataset(root, spec);
  return root;
}

}  // namespace

TEST_CASE("template expansion yields the documented step sequences") {
  const auto ctx = with_reverse_pe(true);
  CHECK(step_names(expand_template(Modality::SMRI, ctx, catalog())) ==
        std::vector<std::string>{"convert", "recon_all", "gtmseg", "segment_bs"});
  CHECK(step_names(expand_template(Modality::FMRI, ctx, catalog())) ==
        std::vector<std::string>{"convert", "preproc_sess", "fast_segment", "nuisance_regress", "connectivity_matrix"});
  CHECK(step_names(expand_template(Modality::DMRI, ctx, catalog())) ==
        std::vector<std::string>{"convert", "meta_extract", "topup", "eddy", "bet_mask", "bvec_rotate", "dti_fit",
                                 "csd_fod", "bbr_register", "tractography", "tck2connectome"});
  CHECK(step_names(expand_template(Modality::PET, ctx, catalog())) ==
        std::vector<std::string>{"convert", "frame_realign", "temporal_average", "suvr"});
  CHECK(terminal_step_id(Modality::SMRI, ctx, catalog()) == "smri.segment_bs");
}

TEST_CASE("topup exists exactly when a reverse phase-encoded b=0 series exists") {
  const auto with = expand_template(Modality::DMRI, with_reverse_pe(true), catalog());
  const auto without = expand_template(Modality::DMRI, with_reverse_pe(false), catalog());
  CHECK(find(with, "dmri.eddy").depends_on == std::vector<std::string>{"dmri.topup"});
  CHECK(find(without, "dmri.eddy").depends_on == std::vector<std::string>{"dmri.meta_extract"});
  CHECK(without.size() + 1 == with.size());
  for (const auto& n : without) CHECK(n.step_id != "dmri.topup");
  CHECK(expand_template(Modality::DMRI, DatasetContext{}, catalog()).size() == without.size());

  testing::TempDir tmp;
  const auto none = scan_dataset(synthetic(tmp / "a", 3));
  CHECK(none.subjects.size() == 3);
  CHECK_FALSE(none.reverse_pe_b0());
  const auto one = scan_dataset(synthetic(tmp / "b", 3, {2}));
  CHECK(one.reverse_pe_b0());
  CHECK(one.total_readout_time().has_value());
}

TEST_CASE("catalog integrity: tools resolve and schemas exist") {
  for (Modality m : kAllModalities) {
    REQUIRE(catalog().covers(m));
    for (const auto& n : expand_template(m, with_reverse_pe(true), catalog())) {
      CHECK_MESSAGE(catalog().has_tool(n.tool_id), n.step_id);
      CHECK_MESSAGE(catalog().has_schema(n.output_schema_id), n.step_id);
    }
  }
  CHECK_THROWS_AS(catalog().tool("no_such_tool"), Error);
  auto doc = catalog().source();
  doc["modalities"]["SMRI"]["steps"][1]["tool"] = "no_such_tool";
  CHECK_THROWS_AS(TemplateCatalog::from_json(doc), ConfigError);
}

TEST_CASE("recon_all mock creates its scripted tree") {
  testing::TempDir tmp;
  const auto data = synthetic(tmp / "data", 1);
  const auto outs = run_chain(Modality::SMRI, data, tmp / "wf", {}, MockManifest::load_default());
  const auto unit = outs.at("smri.recon_all") / "sub-001/ses-20210315";
  CHECK(fs::is_regular_file(unit / "mri/brain.nii"));
  CHECK(fs::is_regular_file(unit / "surf/lh.white"));
  CHECK(fs::is_regular_file(unit / "stats/aparc.stats"));
  CHECK(validator::read_nifti_header(unit / "mri/brain.nii").dim[0] == 3);
}

TEST_CASE("every mock success tree passes its schema") {
  testing::TempDir tmp;
  const auto data = synthetic(tmp / "data", 2, {1});
  const auto ctx = scan_dataset(data);
  const auto mocks = MockManifest::load_default();
  int checked = 0;
  for (Modality m : kAllModalities) {
    const auto outs = run_chain(m, data, tmp / "wf", ctx, mocks);
    for (const auto& n : expand_template(m, ctx, catalog())) {
      const auto report = validator::validate_tree(outs.at(n.step_id), catalog().schema(n.output_schema_id));
      CHECK_MESSAGE(report.valid(), n.step_id, ": ", report.feedback);
      ++checked;
    }
  }
  CHECK(checked == 4 + 5 + 11 + 4 + 1);
}

TEST_CASE("mock output trees are deterministic") {
  testing::TempDir tmp;
  const auto data = synthetic(tmp / "data", 2, {2});
  const auto ctx = scan_dataset(data);
  const auto mocks = MockManifest::load_default();
  for (Modality m : {Modality::DMRI, Modality::PET}) {
    run_chain(m, data, tmp / "one", ctx, mocks);
    run_chain(m, data, tmp / "two", ctx, mocks);
  }
  const auto a = snapshot(tmp / "one");
  CHECK(a.size() > 20);
  CHECK(a == snapshot(tmp / "two"));

  SyntheticDatasetSpec spec;
  make_synthetic_dataset(tmp / "d1", spec);
  make_synthetic_dataset(tmp / "d2", spec);
  CHECK(snapshot(tmp / "d1") == snapshot(tmp / "d2"));
}

TEST_CASE("scripted exit codes follow the attempt counter") {
  testing::TempDir tmp;
  const auto data = synthetic(tmp / "data", 1);
  auto mocks = MockManifest::load_default();
  mocks.tools["eddy"].exit_codes = {1, 1, 0};
  mocks.tools["eddy"].stderr_message = "eddy: qa failed";
  fs::create_directories(tmp / "eddy");
  const std::vector<std::string> args{"--modality", "DMRI", "--in", (data).string(), "--out", (tmp / "eddy/out").string()};
  std::string err;
  CHECK(invoke(mocks, "eddy", args, tmp / "eddy", &err) == 1);
  CHECK(err.find("attempt 1") != std::string::npos);
  CHECK(err.find("eddy: qa failed") != std::string::npos);
  CHECK(invoke(mocks, "eddy", args, tmp / "eddy") == 1);
  CHECK(invoke(mocks, "eddy", args, tmp / "eddy") == 0);
  CHECK(invoke(mocks, "eddy", args, tmp / "eddy") == 0);
  CHECK(fs::exists(tmp / "eddy/out/sub-001"));
}

TEST_CASE("required parameters and omitted outputs") {
  testing::TempDir tmp;
  const auto data = synthetic(tmp / "data", 1);
  auto mocks = MockManifest::load_default();
  mocks.tools["bbregister"].requires_params = {{"init", "header"}};
  std::vector<std::string> args{"--modality", "DMRI", "--in", data.string(), "--out", (tmp / "w/out").string()};
  fs::create_directories(tmp / "w");
  std::string err;
  CHECK(invoke(mocks, "bbregister", args, tmp / "w", &err) == 1);
  CHECK(err.find("init=<unset>") != std::string::npos);
  args.insert(args.end(), {"--set", "init=header"});
  CHECK(invoke(mocks, "bbregister", args, tmp / "w") == 0);

  auto omitting = MockManifest::load_default();
  const auto first = omitting.tools["recon_all"].outputs_for("SMRI").front().path;
  omitting.tools["recon_all"].omit = {first};
  fs::create_directories(tmp / "r");
  CHECK(invoke(omitting, "recon_all", {"--in", data.string(), "--out", (tmp / "r/out").string()}, tmp / "r") == 0);
  const auto report = validator::validate_tree(tmp / "r/out", catalog().schema("smri.recon_all"));
  CHECK_FALSE(report.valid());
  CHECK_FALSE(report.missing.empty());
}

TEST_CASE("frame realignment emits one file per input frame") {
  for (int frames : {3, 6}) {
    testing::TempDir tmp;
    const auto data = synthetic(tmp / "data", 2, {}, frames);
    const auto outs = run_chain(Modality::PET, data, tmp / "wf", {}, MockManifest::load_default());
    for (const std::string unit : {"sub-001/ses-20210315", "sub-002/ses-20210315"}) {
      int in = 0, realigned = 0;
      for (const auto& e : fs::directory_iterator(outs.at("pet.convert") / unit / "pet")) in += e.path().filename().string().starts_with("frame_");
      for (const auto& e : fs::directory_iterator(outs.at("pet.frame_realign") / unit / "pet"))
        realigned += e.path().filename().string().starts_with("rframe_");
      CHECK(in == frames);
      CHECK(realigned == in);
    }
  }
}

TEST_CASE("install_mock_suite writes runnable stubs") {
  testing::TempDir tmp;
  const auto mocks = MockManifest::load_default();
  const auto stubs = install_mock_suite(mocks, tmp / "tools", "/bin/echo");
  CHECK(stubs.size() == mocks.tools.size());
  for (const auto& [id, path] : stubs) {
    CHECK(fs::is_regular_file(path));
    CHECK((fs::status(path).permissions() & fs::perms::owner_exec) != fs::perms::none);
  }
  CHECK(MockManifest::load(tmp / "tools/mock_manifest.json").to_json() == mocks.to_json());
  CHECK_THROWS_AS(parse_mock_args({"--in", "x"}), ConfigError);
  CHECK_THROWS_AS(parse_mock_args({"--out", "o", "--set", "novalue"}), ConfigError);
  CHECK_THROWS_AS(parse_mock_args({"--out", "o", "--bogus"}), ConfigError);
}
