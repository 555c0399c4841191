#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cryofit/density.hpp"
#include "cryofit/geometry.hpp"
#include "cryofit/mapio.hpp"
#include "cryofit/seqalign.hpp"
#include "cryofit/structio.hpp"

namespace cryofit {

// Energies in kcal/mol, lengths in Å, forces in kcal/mol/Å.
struct EnergyForces {
  double energy = 0.0;
  std::vector<Vec3> forces;
};

struct ForceConstants {
  double bond_length = 3.8;
  double k_bond = 40.0;
  double k_angle = 10.0;     // per rad^2
  double k_rep = 20.0;
  double rep_radius = 2.0;   // repulsion acts below 2 * rep_radius
};

struct Angle {
  std::size_t i, j, k;  // j is the vertex
  double rest = 0.0;    // rad
};

/// Cα-only chain model: one particle per residue carrying a CA atom.
struct Topology {
  std::size_t n_particles = 0;
  std::vector<std::array<std::size_t, 2>> bonds;
  std::vector<Angle> angles;
  std::vector<std::uint64_t> excluded;  // sorted pair keys exempt from repulsion
  ForceConstants constants;

  bool is_excluded(std::size_t a, std::size_t b) const;
};

// Particle order follows chains then residues. Consecutive residue numbers
// are bonded; rest angles are taken from `structure` itself.
Topology build_topology(const Structure& structure, const ForceConstants& constants = {});
std::vector<Vec3> particle_positions(const Structure& structure);
// Copy of `structure` with each residue moved so its CA sits at coords[i].
Structure apply_positions(const Structure& structure, std::span<const Vec3> coords);

struct TmdRestraint {
  std::vector<std::size_t> atom_ids;
  std::vector<Vec3> targets;
  double h = 50.0;        // kcal/mol/Å^2
  double t_total = 500.0; // steps
  double d0 = 0.0;        // D at the start of the schedule

  void validate() const;
};

// Distance to target sqrt(sum |r_i - c_i|^2) over the restrained atoms.
double tmd_distance(std::span<const Vec3> coords, const TmdRestraint& restraint);
// Linear schedule from 1 at t = 0 to 0 at t_total, constant afterwards.
double tmd_gamma(double t, double t_total);

/// U = h/2 (D(t) - gamma(t) D0)^2 with analytic forces; zero force at D = 0.
EnergyForces tmd_energy_forces(std::span<const Vec3> coords, const TmdRestraint& restraint, double t);

/// U = sum over masked atoms of k (1 - rho(r)/rho_max) with trilinear rho.
class MdffPotential {
 public:
  MdffPotential(const VoxelGrid& map, double k);
  EnergyForces evaluate(std::span<const Vec3> coords, std::span<const std::uint8_t> atom_mask) const;
  double rho_max() const { return rho_max_; }

 private:
  const VoxelGrid* map_;
  double k_;
  double rho_max_;
};

EnergyForces mdff_energy_forces(std::span<const Vec3> coords, const VoxelGrid& map, double k,
                                std::span<const std::uint8_t> atom_mask);

/// U = k (1 - ccc(exp, sim(coords))) with the simulated map on the
/// experimental lattice; forces follow the chain rule through every kernel.
class CdmdPotential {
 public:
  CdmdPotential(const VoxelGrid& exp_map, double k, const SimulationSpec& spec);
  EnergyForces evaluate(std::span<const Vec3> coords, std::span<const double> weights) const;
  double correlation(std::span<const Vec3> coords, std::span<const double> weights) const;

 private:
  const VoxelGrid* exp_;
  double k_;
  SimulationSpec spec_;
  double exp_norm2_;
};

EnergyForces cdmd_energy_forces(std::span<const Vec3> coords, const VoxelGrid& exp_map, double k,
                                const SimulationSpec& spec);

/// Harmonic bonds, harmonic angles and soft-core repulsion between
/// non-excluded pairs closer than twice the repulsion radius.
EnergyForces bonded_energy_forces(std::span<const Vec3> coords, const Topology& topology);

EnergyForces positional_restraints(std::span<const Vec3> coords, std::span<const Vec3> ref,
                                   std::span<const std::uint8_t> atom_mask, double k_pos);

enum class MapSource { None, Backbone, Experimental };
enum class MapPotentialKind { Mdff, Cdmd };
enum class RestraintSet { None, TmdAtoms, All };

struct StageSpec {
  std::string name = "stage";
  bool tmd = false;
  int tmd_steps = 500;
  MapSource map = MapSource::None;
  MapPotentialKind potential = MapPotentialKind::Mdff;
  double k_map = 0.3;
  double resolution = 4.0;  // Å, for CDMD and ccc reporting
  RestraintSet restrain = RestraintSet::None;
  double k_pos = 10.0;
  int max_steps = 1000;
  double force_tolerance = 0.05;  // max per-atom |F|
  double ccc_target = 0.0;        // 0 disables the ccc stop
};

struct FitConfig {
  ForceConstants constants;
  double tmd_h = 50.0;
  double friction = 0.9;          // fraction of velocity removed per step; 1 = minimisation
  double step_size = 0.004;       // Å per (kcal/mol/Å) per step
  double max_displacement = 0.1;  // Å per step per particle
  int log_interval = 10;
  double divergence_limit = 1e8;
  std::vector<StageSpec> stages;

  static FitConfig defaults();
};

struct TmdTarget {
  std::size_t particle = 0;
  Vec3 target;
};

struct FitProblem {
  Structure initial;
  std::vector<TmdTarget> targets;
  std::optional<VoxelGrid> backbone_map;
  std::optional<VoxelGrid> experimental_map;
};

struct LogRecord {
  std::string stage;
  int step = 0;         // within the stage
  double bonded = 0.0;
  double tmd = 0.0;
  double map = 0.0;
  double restraint = 0.0;
  double total = 0.0;
  double rmsd_to_target = 0.0;  // over TMD atoms, Å
  std::optional<double> ccc;
  double max_force = 0.0;
  double max_restrained_displacement = 0.0;
};

struct StageSummary {
  std::string name;
  int steps = 0;
  std::string termination;  // converged | step_budget | ccc_target | skipped
  double final_energy = 0.0;
};

struct FitResult {
  Structure final_structure;
  std::vector<LogRecord> log;
  std::vector<StageSummary> stages;
};

/// Labeled fragments to TMD targets: sequence s maps to initial chain s and
/// sequence position p to author residue first_author_index[s] + p.
std::vector<TmdTarget> correspondences_from_alignment(const Structure& initial,
                                                      const std::vector<LabeledFragment>& accepted,
                                                      std::span<const int> first_author_index);

/// Runs the configured stages in order. Throws DataError without TMD
/// targets when a stage needs them and NumericalError on divergence.
FitResult run_fitting(const FitProblem& problem, const FitConfig& config);

}  // namespace cryofit
