#pragma once

#include <string>
#include <vector>

#include "cryofit/features.hpp"
#include "cryofit/geometry.hpp"
#include "cryofit/structio.hpp"

namespace cryofit {

struct CaCandidate {
  Index3 cell{};
  Vec3 position;  // cell lower corner + predicted offset
  Vec3 ppv;
  AaDistribution aa{};
  double score = 0.0;
};

// Ordered N->C: each residue's PPV points at the next one.
struct Fragment {
  std::vector<CaCandidate> residues;

  std::size_t size() const { return residues.size(); }
};

struct TraceOptions {
  double epsilon_sq = 1.0;         // Å^2, bound on |X_q + V_q - X_p|^2
  double min_link_distance = 2.0;  // Å, open interval on consecutive Cα distance
  double max_link_distance = 4.5;
  int search_cells = 3;            // Chebyshev radius of the successor search, in 2 Å cells
};

/// One candidate per coarse cell whose detection probability reaches
/// `threshold`, in cell order. Requires 0 < threshold < 1.
std::vector<CaCandidate> extract_candidates(const FeatureGrids& grids, double threshold = 0.5);

double link_residual_sq(const CaCandidate& from, const CaCandidate& to);

/// Links candidates into fragments with mutual-best matching on the PPV
/// criterion. The result does not depend on the candidate order; fragments
/// are returned ordered by the cell index of their first residue.
std::vector<Fragment> trace_fragments(const std::vector<CaCandidate>& candidates, const TraceOptions& options = {});

std::vector<Fragment> prune_fragments(std::vector<Fragment> fragments, std::size_t min_len = 3);

// A, B, ..., Z, AA, AB, ... for fragment index 0, 1, ...
std::string fragment_chain_id(std::size_t index);

/// CA-only model, one chain per fragment; residue names follow the argmax
/// of each AA distribution and residues are numbered from 1.
Structure fragments_to_structure(const std::vector<Fragment>& fragments);

// Sidecar JSON carrying positions, PPVs, scores and AA distributions.
std::string fragments_to_json(const std::vector<Fragment>& fragments);
std::vector<Fragment> fragments_from_json(const std::string& text);

}  // namespace cryofit
