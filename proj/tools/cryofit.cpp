#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cryofit/errors.hpp"
#include "cryofit/parallel.hpp"
#include "cryofit/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> chain;
  std::optional<double> detection;
  std::optional<double> epsilon_sq;
  std::optional<std::size_t> min_len;
  std::optional<double> confidence;
  std::optional<double> match_cutoff;
  bool no_prune = false;
};

cryofit::PipelineConfig build_config(const Overrides& o) {
  cryofit::PipelineConfig c = o.config.empty() ? cryofit::PipelineConfig{} : cryofit::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.chain) c.chain = *o.chain;
  if (o.detection) c.thresholds.detection = *o.detection;
  if (o.epsilon_sq) c.thresholds.epsilon_sq = *o.epsilon_sq;
  if (o.min_len) c.thresholds.min_len = *o.min_len;
  if (o.confidence) c.thresholds.confidence = *o.confidence;
  if (o.match_cutoff) c.thresholds.match_cutoff = *o.match_cutoff;
  if (o.no_prune) c.prune = false;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cryofit: fragment-guided model building from cryo-EM feature grids"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON pipeline config");
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--chain", o.chain, "chain ID to process");
    sub->add_option("--detection-threshold", o.detection);
    sub->add_option("--epsilon-sq", o.epsilon_sq);
    sub->add_option("--min-len", o.min_len);
    sub->add_option("--confidence", o.confidence);
    sub->add_option("--match-cutoff", o.match_cutoff);
    sub->add_flag("--no-prune", o.no_prune, "keep fragments of every length");
  };

  const char* names[][2] = {
      {"synth", "write a synthetic structure, sequence and perturbed initial model"},
      {"oracle", "generate (noisy) feature grids from the structure"},
      {"trace", "trace Calpha fragments from feature grids"},
      {"align", "label fragments with sequence positions"},
      {"fit", "fit the initial model to fragments and maps"},
      {"eval", "evaluate outputs against the structure"},
      {"ablate-prune", "pruning threshold sweep"},
      {"ablate-aa", "joint vs per-residue AA labeling"},
      {"print-config", "print the effective configuration"},
  };
  for (const auto& [name, help] : names) add_common(app.add_subcommand(name, help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const cryofit::PipelineConfig config = build_config(o);
    cryofit::set_num_threads(config.threads);
    if (cmd == "synth") cryofit::cmd_synth(config);
    else if (cmd == "oracle") cryofit::cmd_oracle(config);
    else if (cmd == "trace") cryofit::cmd_trace(config);
    else if (cmd == "align") cryofit::cmd_align(config);
    else if (cmd == "fit") cryofit::cmd_fit(config);
    else if (cmd == "eval") cryofit::cmd_eval(config);
    else if (cmd == "ablate-prune") cryofit::cmd_ablate_prune(config);
    else if (cmd == "ablate-aa") cryofit::cmd_ablate_aa(config);
    else if (cmd == "print-config") std::cout << cryofit::config_to_json(config).dump(2) << "\n";
    return 0;
  } catch (const cryofit::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cryofit::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
