#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryofit/features.hpp"
#include "cryofit/fitting.hpp"
#include "cryofit/seqalign.hpp"
#include "cryofit/structio.hpp"
#include "cryofit/tracing.hpp"

namespace cryofit {

struct Thresholds {
  double detection = 0.5;
  double epsilon_sq = 1.0;   // Å^2
  std::size_t min_len = 3;
  double confidence = 3.4;
  double match_cutoff = 1.5; // Å
};

struct SynthSpec {
  std::size_t length = 60;
  std::size_t tag_length = 12;
  double perturbation_rmsd = 5.0;
};

struct AblationSpec {
  std::vector<std::size_t> min_lens{1, 2, 3, 4, 5, 6, 8};
  int seeds = 20;
  std::size_t aa_min_fragment = 5;
};

struct PipelineConfig {
  // Relative paths resolve against the config file's directory.
  std::string structure;    // deposited / ground-truth model
  std::string sequence;     // FASTA, one record
  std::string initial;      // starting model for fitting
  std::string map;          // optional experimental map
  std::string feature_dir = "features";
  std::string output_dir = "out";
  std::string chain;
  std::uint64_t seed = 0;
  int threads = 1;
  int first_author_index = 1;
  double grid_padding = 6.0;
  bool prune = true;
  Thresholds thresholds;
  NoiseSpec noise;
  FitConfig fitting = FitConfig::defaults();
  SynthSpec synth;
  AblationSpec ablation;
  std::filesystem::path base_dir;  // not serialised

  std::filesystem::path resolve(const std::string& path) const;
  // Throws DataError on out-of-range values; file existence is checked by
  // each subcommand for the inputs it reads.
  void validate() const;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& config);
// Missing keys keep their defaults; unknown keys are errors.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

// Chain `id` of `structure`, or the only chain when `id` is empty.
Structure select_chain(const Structure& structure, const std::string& id);

struct TraceSummary {
  std::size_t candidates = 0;
  std::size_t fragments_before_pruning = 0;
  std::size_t fragments = 0;
};

struct AlignSummary {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

// Each subcommand reads inputs named in `config`, writes into output_dir
// (or feature_dir for cmd_oracle) and logs to standard error.
void cmd_synth(const PipelineConfig& config);
void cmd_oracle(const PipelineConfig& config);
TraceSummary cmd_trace(const PipelineConfig& config);
AlignSummary cmd_align(const PipelineConfig& config);
FitResult cmd_fit(const PipelineConfig& config);
nlohmann::ordered_json cmd_eval(const PipelineConfig& config);

// Labeled fragments as written by cmd_align.
std::vector<LabeledFragment> read_alignment(const std::filesystem::path& path);

struct PruningPoint {
  std::size_t min_len = 1;
  double precision = 0.0;
  double recall = 0.0;
  double fragments = 0.0;
};

/// Cα precision/recall of traced fragments for each min_len, averaged over
/// `seeds` noise seeds starting at noise.seed.
std::vector<PruningPoint> pruning_sweep(const Structure& truth, const NoiseSpec& noise, const Thresholds& thresholds,
                                        std::span<const std::size_t> min_lens, int seeds, double grid_padding = 6.0);

struct AaComparison {
  double argmax_precision = 0.0;
  double joint_precision = 0.0;
  std::size_t fragments = 0;
  std::size_t residues = 0;
};

/// Per-residue argmax vs windowed joint labeling on traced fragments of at
/// least `min_fragment` residues, without confidence gating. Joint
/// precision compares the window-assigned type with the truth type.
AaComparison aa_labeling_comparison(const Structure& truth, const Sequence& sequence, const NoiseSpec& noise,
                                    const Thresholds& thresholds, std::size_t min_fragment,
                                    double grid_padding = 6.0);

void cmd_ablate_prune(const PipelineConfig& config);
void cmd_ablate_aa(const PipelineConfig& config);

}  // namespace cryofit
