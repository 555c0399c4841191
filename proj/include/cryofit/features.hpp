#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cryofit/geometry.hpp"
#include "cryofit/mapio.hpp"
#include "cryofit/structio.hpp"

namespace cryofit {

/// Lattice shared by a feature set: the backbone grid at `fine_spacing` and
/// the coarse Cα grid at twice that spacing, both anchored at `origin`.
/// Coarse cell (i,j,k) spans [origin + 2s*(i,j,k), origin + 2s*(i+1,j+1,k+1)).
struct GridSpec {
  Vec3 origin{};
  Index3 fine_dims{1, 1, 1};
  double fine_spacing = 1.0;

  double coarse_spacing() const { return 2.0 * fine_spacing; }
  Index3 coarse_dims() const {
    return {(fine_dims[0] + 1) / 2, (fine_dims[1] + 1) / 2, (fine_dims[2] + 1) / 2};
  }
};

// Box around every atom of `structure` with `padding` Å on each side,
// aligned to whole coarse cells.
GridSpec grid_spec_for(const Structure& structure, double padding = 6.0, double fine_spacing = 1.0);

struct FeatureGrids {
  VoxelGrid bb_prob;                     // fine grid, values in [0,1]
  VoxelGrid ca_prob;                     // coarse grid, values in [0,1]
  std::array<VoxelGrid, 3> ca_offset;    // Å in [0,2]^3 from the cell lower corner
  std::array<VoxelGrid, 3> ppv;          // Å in [-4,4]^3, this Cα to the next
  std::array<VoxelGrid, 20> aa_dist;     // P(AA | Cα), one grid per type
  std::vector<std::uint8_t> ca_mask;     // label side only; empty for predictions
  std::vector<std::uint8_t> ppv_mask;

  const Index3& coarse_dims() const { return ca_prob.dims(); }
  std::size_t cell_count() const { return ca_prob.size(); }
  Vec3 cell_corner(std::size_t cell) const;
  Vec3 offset(std::size_t cell) const;
  Vec3 ppv_at(std::size_t cell) const;
  AaDistribution aa_at(std::size_t cell) const;
  void set_offset(std::size_t cell, const Vec3& v);
  void set_ppv(std::size_t cell, const Vec3& v);
  void set_aa(std::size_t cell, const AaDistribution& p);

  // Throws DataError when a lattice or value-range invariant is violated.
  void validate() const;
};

/// Ground-truth features for `structure`: the oracle standing in for the
/// recognition network. Throws DataError when two Cα share a coarse cell,
/// when a Cα lies outside the grid or a residue lacks a CA atom.
FeatureGrids generate_labels(const Structure& structure, const GridSpec& spec);

struct NoiseSpec {
  double ca_dropout = 0.0;           // marginal probability a true Cα cell is lost
  double dropout_correlation = 0.0;  // 0 = independent; toward 1 = losses in longer runs along the chain
  double fp_rate = 0.0;              // expected false positives per 1000 empty cells
  double offset_jitter_sigma = 0.0;  // Å
  double ppv_jitter_sigma = 0.0;     // Å
  double aa_dirichlet_alpha = 0.0;   // pseudo-count added to every AA type
  double bb_noise_sigma = 0.0;
  double score_sigma = 0.0;          // spread of detection scores on true cells
  std::uint64_t seed = 0;

  void validate() const;
};

struct NoiseLog {
  std::vector<std::size_t> dropped_cells;
  std::vector<std::size_t> false_positive_cells;
};

/// Degrades oracle labels into a plausible network prediction. The output
/// is a pure function of (labels, spec); an all-zero spec is the identity.
FeatureGrids inject_noise(const FeatureGrids& labels, const NoiseSpec& spec, NoiseLog* log = nullptr);

// Loss oracles over flat arrays. Probabilities are clamped to
// [kProbFloor, 1 - kProbFloor] before any logarithm.
inline constexpr double kProbFloor = 1e-9;
inline constexpr double kDiceSmooth = 1e-7;

double dice_loss(std::span<const double> pred, std::span<const double> label);
double class_balance_weight(std::span<const double> label);
double weighted_bce(std::span<const double> pred, std::span<const double> label);

double loss_backbone(std::span<const double> pred, std::span<const double> label);
double loss_ca_detection(std::span<const double> pred, std::span<const double> label);
// Mean squared Euclidean error over masked cells; empty mask is an error.
double loss_ca_location(std::span<const Vec3> pred, std::span<const Vec3> label, std::span<const std::uint8_t> mask);
double loss_aa(std::span<const AaDistribution> pred, std::span<const AaDistribution> label_one_hot,
               std::span<const std::uint8_t> mask);
double loss_ppv(std::span<const Vec3> pred, std::span<const Vec3> label, std::span<const std::uint8_t> mask);

struct LossComponents {
  double backbone = 0.0;
  double detection = 0.0;
  double location = 0.0;
  double aa = 0.0;
  double ppv = 0.0;
};

struct LossWeights {
  double detection = 1.0;
  double location = 1.0;
  double aa = 1.0;
  double ppv = 0.05;
};

double loss_total(const LossComponents& c, const LossWeights& w = {});

// All five components of `pred` against `label` (masks taken from label).
LossComponents compute_losses(const FeatureGrids& pred, const FeatureGrids& label);

std::vector<Vec3> offsets_of(const FeatureGrids& g);
std::vector<Vec3> ppvs_of(const FeatureGrids& g);
std::vector<AaDistribution> aa_of(const FeatureGrids& g);

/// Directory of MRC files (bb_prob, ca_prob, offset_{x,y,z}, ppv_{x,y,z},
/// aa_00..aa_19, optional ca_mask/ppv_mask) plus manifest.json.
void write_feature_dir(const std::filesystem::path& dir, const FeatureGrids& grids);
FeatureGrids read_feature_dir(const std::filesystem::path& dir);

}  // namespace cryofit
