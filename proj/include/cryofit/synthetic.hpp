#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cryofit/geometry.hpp"
#include "cryofit/structio.hpp"

namespace cryofit {

// Places d so that |cd| = bond, angle(b,c,d) = theta and dihedral(a,b,c,d) = phi.
Vec3 place_next(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double theta, double phi);

/// Compact Cα trace of `n` residues: helices joined by loops, consecutive
/// spacing 3.8 Å and every non-adjacent pair at least 4.2 Å apart.
/// Deterministic in `seed`.
std::vector<Vec3> generate_ca_trace(std::size_t n, std::uint64_t seed);

/// Approximate N, CA, C, O backbone around a Cα trace; residues numbered
/// from `first_seq_num`.
Chain backbone_from_trace(const std::vector<Vec3>& trace, const std::vector<AminoAcid>& types, const std::string& id,
                          int first_seq_num);

struct SyntheticProtein {
  Structure structure;   // single chain, modeled residues only
  Sequence sequence;     // includes unmodeled tags on both ends
  int first_author_index = 1;  // author number of sequence position 0
};

SyntheticProtein make_synthetic_protein(std::size_t n_modeled, std::uint64_t seed, std::size_t tag_length = 12,
                                        const std::string& chain_id = "A");

/// Moves every residue rigidly by a smooth displacement field scaled so the
/// Cα RMSD to the input is exactly `target_rmsd`.
Structure perturb_structure(const Structure& structure, double target_rmsd, std::uint64_t seed);

}  // namespace cryofit
