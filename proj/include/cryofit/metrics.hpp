#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cryofit/geometry.hpp"
#include "cryofit/structio.hpp"

namespace cryofit {

struct MatchReport {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> match_pairs;  // (detected, truth)
};

/// Greedy one-to-one matching by ascending distance (ties by detected, then
/// truth index); pairs farther than `cutoff` stay unmatched. Precision of an
/// empty detection set is 0. Throws DataError on an empty truth set.
MatchReport ca_precision_recall(std::span<const Vec3> detected, std::span<const Vec3> truth, double cutoff = 1.5);

/// Fraction of position-matched residues whose assigned type equals the
/// truth type. Throws DataError when nothing matches.
double aa_precision(std::span<const Vec3> positions, std::span<const AminoAcid> assigned, const Chain& truth,
                    double cutoff = 1.5);

// sqrt(mean |a_i - b_i|^2) without superposition.
double rmsd(std::span<const Vec3> a, std::span<const Vec3> b);

struct Superposition {
  double rotation[3][3];
  Vec3 translation;

  Vec3 apply(const Vec3& p) const;
};

// Least-squares rigid transform taking `mobile` onto `target`.
Superposition kabsch(std::span<const Vec3> mobile, std::span<const Vec3> target);

double tm_d0(std::size_t l_ref);

// TM-score terms for already superposed pairs: (1/l_norm) sum 1/(1+(d/d0)^2).
double tm_score_fixed(std::span<const Vec3> model, std::span<const Vec3> reference, double d0, std::size_t l_norm);

/// Max over superpositions of the TM-score for corresponding Cα pairs,
/// normalised by the reference length.
double tm_score_positions(std::span<const Vec3> model, std::span<const Vec3> reference, std::size_t l_ref);

/// Cα TM-score with correspondence by residue number (and chain ID when
/// either structure has several chains). Throws DataError with fewer than
/// three common residues.
double tm_score(const Structure& model, const Structure& reference);

}  // namespace cryofit
