#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cryofit/structio.hpp"
#include "cryofit/tracing.hpp"

namespace cryofit {

struct LabeledFragment {
  Fragment fragment;
  std::size_t fragment_id = 0;    // position in the input fragment list
  std::size_t sequence_index = 0; // which target sequence (chain) matched
  std::size_t start_index = 0;    // 0-based position of the first residue
  std::vector<AminoAcid> aa_assignment;
  double confidence = 0.0;
  std::vector<double> all_scores;
  bool ambiguous = false;         // several windows share the best score
};

enum class RejectReason { LowConfidence, Overlap, TooLong };

struct RejectedFragment {
  std::size_t fragment_id = 0;
  RejectReason reason = RejectReason::LowConfidence;
  double confidence = 0.0;
  std::size_t best_start = 0;
  std::size_t sequence_index = 0;
};

std::string_view to_string(RejectReason r);

/// Window scores s(i), i = 0..L-N: the mean over fragment positions of the
/// log-probability of the residue type found at that window position.
/// Probabilities are floored at 1e-9. Throws std::invalid_argument if N > L.
std::vector<double> alignment_scores(std::span<const AaDistribution> profile, const Sequence& sequence);
std::vector<double> alignment_scores(const Fragment& fragment, const Sequence& sequence);

/// (max(s) - mean(s)) / (population std(s) + 1e-6).
double confidence(std::span<const double> scores);

struct AlignOptions {
  double confidence_threshold = 3.4;
};

// Half-open interval of sequence positions claimed by an accepted fragment.
struct SequenceClaim {
  std::size_t sequence_index = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

using LabelResult = std::variant<LabeledFragment, RejectedFragment>;

/// Best window over all target sequences (ties: lowest sequence, then
/// lowest start). Rejected when confidence falls below the threshold or the
/// window overlaps an existing claim.
LabelResult label_fragment(const Fragment& fragment, std::span<const Sequence> sequences, const AlignOptions& options,
                           std::span<const SequenceClaim> claimed, std::size_t fragment_id = 0);

struct AlignmentResult {
  std::vector<LabeledFragment> accepted;  // sorted by descending confidence
  std::vector<RejectedFragment> rejected;
};

/// Scores every fragment, then accepts greedily in descending confidence so
/// that accepted windows never overlap.
AlignmentResult label_fragments(const std::vector<Fragment>& fragments, std::span<const Sequence> sequences,
                                const AlignOptions& options = {});

// Per-residue argmax of the AA distribution (the non-joint baseline).
std::vector<AminoAcid> argmax_types(const Fragment& fragment);

}  // namespace cryofit
