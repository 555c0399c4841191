#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cryofit/errors.hpp"
#include "cryofit/pipeline.hpp"
#include "cryofit/synthetic.hpp"

using namespace cryofit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cryofit_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

PipelineConfig small_config(const fs::path& dir, std::size_t length = 40) {
  PipelineConfig c;
  c.base_dir = dir;
  c.structure = "truth.pdb";
  c.sequence = "seq.fasta";
  c.initial = "initial.pdb";
  c.synth.length = length;
  c.seed = 3;
  c.fitting.stages[0].tmd_steps = 300;
  c.fitting.stages[1].max_steps = 50;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  PipelineConfig c;
  c.structure = "a.pdb";
  c.thresholds.min_len = 5;
  c.noise.fp_rate = 2.5;
  c.fitting.stages[1].k_map = 0.7;
  c.ablation.min_lens = {2, 4};
  const auto j = config_to_json(c);
  const PipelineConfig back = config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(config_to_json(back).dump() == j.dump());
  CHECK(back.thresholds.min_len == 5);
  CHECK(back.fitting.stages.size() == c.fitting.stages.size());

  auto bad = nlohmann::json::parse(j.dump());
  bad["thresholds"]["detecton"] = 0.4;
  CHECK_THROWS_AS(config_from_json(bad), DataError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"bogus": 1})")), DataError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"thresholds": {"min_len": "x"}})")), DataError);

  PipelineConfig v;
  v.thresholds.detection = 1.5;
  CHECK_THROWS_AS(v.validate(), DataError);
  v = PipelineConfig{};
  v.fitting.friction = 0.0;
  CHECK_THROWS_AS(v.validate(), DataError);

  const fs::path dir = fresh_dir("config");
  std::ofstream(dir / "c.json") << R"({"structure": "x.pdb", "seed": 9})";
  const PipelineConfig loaded = load_config(dir / "c.json");
  CHECK(loaded.seed == 9);
  CHECK(loaded.resolve(loaded.structure) == dir / "x.pdb");
}

TEST_CASE("chain selection") {
  Structure s;
  s.chains.push_back(make_synthetic_protein(10, 1, 0, "A").structure.chains[0]);
  s.chains.push_back(make_synthetic_protein(10, 2, 0, "B").structure.chains[0]);
  CHECK_THROWS_AS(select_chain(s, ""), DataError);
  CHECK_THROWS_AS(select_chain(s, "C"), DataError);
  CHECK(select_chain(s, "B").chains.at(0).id == "B");
}

TEST_CASE("pipeline on a clean synthetic target") {
  const fs::path dir = fresh_dir("clean");
  const PipelineConfig c = small_config(dir);
  cmd_synth(c);
  cmd_oracle(c);
  const TraceSummary t = cmd_trace(c);
  CHECK(t.fragments == 1);
  const AlignSummary a = cmd_align(c);
  CHECK(a.accepted == 1);
  CHECK(a.rejected == 0);
  const auto accepted = read_alignment(dir / "out" / "alignment.json");
  REQUIRE(accepted.size() == 1);
  CHECK(accepted[0].start_index == 12);
  cmd_fit(c);
  const auto report = cmd_eval(c);
  CHECK(report["ca_detection"]["precision"].get<double>() == 1.0);
  CHECK(report["ca_detection"]["recall"].get<double>() == 1.0);
  CHECK(report["alignment"]["index_accuracy"].get<double>() == 1.0);
  CHECK(report["fit"]["tm_score"].get<double>() > 0.95);
  CHECK(report["fit"]["rmsd_covered"].get<double>() <= 0.5);

  // Rerunning rewrites identical bytes.
  const std::string fitted = slurp(dir / "out" / "fitted.pdb"), traj = slurp(dir / "out" / "trajectory.jsonl");
  cmd_fit(c);
  CHECK(slurp(dir / "out" / "fitted.pdb") == fitted);
  CHECK(slurp(dir / "out" / "trajectory.jsonl") == traj);

  // Evaluating the truth against itself.
  PipelineConfig self = c;
  self.output_dir = "self";
  fs::create_directories(dir / "self");
  fs::copy_file(dir / "truth.pdb", dir / "self" / "fitted.pdb");
  const auto sr = cmd_eval(self);
  CHECK(sr["fit"]["tm_score"].get<double>() == doctest::Approx(1.0));
  CHECK(sr["fit"]["rmsd"].get<double>() == 0.0);
}

TEST_CASE("pipeline error paths") {
  const fs::path dir = fresh_dir("errors");
  PipelineConfig c = small_config(dir);
  CHECK_THROWS_AS(cmd_oracle(c), DataError);  // no structure yet
  cmd_synth(c);
  CHECK_THROWS_AS(cmd_trace(c), DataError);   // no features yet
  cmd_oracle(c);
  CHECK_THROWS_AS(cmd_fit(c), DataError);     // no alignment yet

  // Every cell dropped: no fragments.
  PipelineConfig empty = c;
  empty.feature_dir = "empty_features";
  empty.noise.ca_dropout = 1.0;
  cmd_oracle(empty);
  CHECK_THROWS_AS(cmd_trace(empty), DataError);

  // Alignment with nothing confident enough leaves fit without targets.
  PipelineConfig strict = c;
  strict.output_dir = "strict";
  strict.thresholds.confidence = 1e9;
  cmd_trace(strict);
  const AlignSummary a = cmd_align(strict);
  CHECK(a.accepted == 0);
  CHECK_THROWS_AS(cmd_fit(strict), DataError);
}

TEST_CASE("ablation helpers") {
  const SyntheticProtein p = make_synthetic_protein(40, 4, 0);
  NoiseSpec clean;
  Thresholds th;
  const std::vector<std::size_t> lens{1, 3};
  const auto pts = pruning_sweep(p.structure, clean, th, lens, 2);
  REQUIRE(pts.size() == 2);
  for (const auto& pt : pts) {
    CHECK(pt.precision == 1.0);
    CHECK(pt.recall == 1.0);
  }
  const auto cmp = aa_labeling_comparison(p.structure, p.sequence, clean, th, 5);
  CHECK(cmp.argmax_precision == 1.0);
  CHECK(cmp.joint_precision == 1.0);
}
