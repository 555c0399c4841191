#include "cryofit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cryofit/errors.hpp"
#include "cryofit/parallel.hpp"

namespace cryofit {

namespace {

std::uint64_t pair_key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

double angle_between(const Vec3& u, const Vec3& v) {
  const double c = dot(u, v) / (norm(u) * norm(v));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

struct ParticleRef {
  std::size_t chain;
  std::size_t residue;
};

std::vector<ParticleRef> particle_refs(const Structure& s) {
  std::vector<ParticleRef> refs;
  for (std::size_t c = 0; c < s.chains.size(); ++c)
    for (std::size_t r = 0; r < s.chains[c].residues.size(); ++r)
      if (s.chains[c].residues[r].ca()) refs.push_back({c, r});
  return refs;
}

}  // namespace

bool Topology::is_excluded(std::size_t a, std::size_t b) const {
  return std::binary_search(excluded.begin(), excluded.end(), pair_key(a, b));
}

std::vector<Vec3> particle_positions(const Structure& structure) {
  std::vector<Vec3> out;
  for (const auto& ref : particle_refs(structure))
    out.push_back(structure.chains[ref.chain].residues[ref.residue].ca()->position);
  return out;
}

Structure apply_positions(const Structure& structure, std::span<const Vec3> coords) {
  const auto refs = particle_refs(structure);
  if (refs.size() != coords.size()) throw std::invalid_argument("apply_positions: particle count mismatch");
  Structure out = structure;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto& res = out.chains[refs[i].chain].residues[refs[i].residue];
    const Vec3 shift = coords[i] - res.ca()->position;
    for (auto& atom : res.atoms) atom.position += shift;
  }
  return out;
}

Topology build_topology(const Structure& structure, const ForceConstants& constants) {
  Topology top;
  top.constants = constants;
  const auto refs = particle_refs(structure);
  const auto pos = particle_positions(structure);
  top.n_particles = refs.size();
  for (std::size_t i = 0; i + 1 < refs.size(); ++i) {
    if (refs[i].chain != refs[i + 1].chain) continue;
    const auto& chain = structure.chains[refs[i].chain];
    if (chain.residues[refs[i + 1].residue].seq_num == chain.residues[refs[i].residue].seq_num + 1)
      top.bonds.push_back({i, i + 1});
  }
  for (std::size_t b = 0; b + 1 < top.bonds.size(); ++b) {
    if (top.bonds[b][1] != top.bonds[b + 1][0]) continue;
    const std::size_t i = top.bonds[b][0], j = top.bonds[b][1], k = top.bonds[b + 1][1];
    top.angles.push_back({i, j, k, angle_between(pos[i] - pos[j], pos[k] - pos[j])});
  }
  for (const auto& b : top.bonds) top.excluded.push_back(pair_key(b[0], b[1]));
  for (const auto& a : top.angles) top.excluded.push_back(pair_key(a.i, a.k));
  std::sort(top.excluded.begin(), top.excluded.end());
  top.excluded.erase(std::unique(top.excluded.begin(), top.excluded.end()), top.excluded.end());
  return top;
}

void TmdRestraint::validate() const {
  if (atom_ids.empty()) throw std::invalid_argument("TmdRestraint: no restrained atoms");
  if (atom_ids.size() != targets.size()) throw std::invalid_argument("TmdRestraint: atom/target count mismatch");
  auto sorted = atom_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("TmdRestraint: duplicate atom ids");
  if (!(t_total > 0.0)) throw std::invalid_argument("TmdRestraint: t_total must be positive");
}

double tmd_distance(std::span<const Vec3> coords, const TmdRestraint& restraint) {
  double sum = 0.0;
  for (std::size_t n = 0; n < restraint.atom_ids.size(); ++n)
    sum += norm2(coords[restraint.atom_ids[n]] - restraint.targets[n]);
  return std::sqrt(sum);
}

double tmd_gamma(double t, double t_total) { return std::clamp(1.0 - t / t_total, 0.0, 1.0); }

EnergyForces tmd_energy_forces(std::span<const Vec3> coords, const TmdRestraint& restraint, double t) {
  restraint.validate();
  EnergyForces out{0.0, std::vector<Vec3>(coords.size())};
  const double d = tmd_distance(coords, restraint);
  const double lag = d - tmd_gamma(t, restraint.t_total) * restraint.d0;
  out.energy = 0.5 * restraint.h * lag * lag;
  if (d == 0.0) return out;
  const double scale = -restraint.h * lag / d;
  for (std::size_t n = 0; n < restraint.atom_ids.size(); ++n) {
    const std::size_t i = restraint.atom_ids[n];
    out.forces[i] += scale * (coords[i] - restraint.targets[n]);
  }
  return out;
}

MdffPotential::MdffPotential(const VoxelGrid& map, double k) : map_(&map), k_(k), rho_max_(map.max_value()) {
  if (!(rho_max_ > 0.0)) throw DataError("MDFF: map has no positive density");
}

EnergyForces MdffPotential::evaluate(std::span<const Vec3> coords, std::span<const std::uint8_t> atom_mask) const {
  if (atom_mask.size() != coords.size()) throw std::invalid_argument("MDFF: mask size mismatch");
  EnergyForces out{0.0, std::vector<Vec3>(coords.size())};
  std::vector<double> terms(coords.size(), 0.0);
  parallel_for(coords.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!atom_mask[i]) continue;
      const Sample s = interpolate(*map_, coords[i]);
      terms[i] = k_ * (1.0 - s.value / rho_max_);
      out.forces[i] = s.gradient * (k_ / rho_max_);
    }
  });
  out.energy = pairwise_sum(terms);
  return out;
}

EnergyForces mdff_energy_forces(std::span<const Vec3> coords, const VoxelGrid& map, double k,
                                std::span<const std::uint8_t> atom_mask) {
  return MdffPotential(map, k).evaluate(coords, atom_mask);
}

CdmdPotential::CdmdPotential(const VoxelGrid& exp_map, double k, const SimulationSpec& spec)
    : exp_(&exp_map), k_(k), spec_(spec) {
  spec_.dims = exp_map.dims();
  spec_.spacing = exp_map.spacing();
  spec_.origin = exp_map.origin();
  spec_.validate();
  const auto e = exp_map.values();
  exp_norm2_ = deterministic_sum(e.size(), [&](std::size_t i) { return e[i] * e[i]; });
  if (exp_norm2_ == 0.0) throw DataError("CDMD: experimental map is all zero");
}

double CdmdPotential::correlation(std::span<const Vec3> coords, std::span<const double> weights) const {
  const VoxelGrid sim = simulate_density(coords, weights, spec_);
  const auto e = exp_->values();
  const auto s = sim.values();
  const double es = deterministic_sum(e.size(), [&](std::size_t i) { return e[i] * s[i]; });
  const double ss = deterministic_sum(s.size(), [&](std::size_t i) { return s[i] * s[i]; });
  if (ss == 0.0) throw DataError("CDMD: simulated map is all zero (atoms outside the grid)");
  return es / std::sqrt(exp_norm2_ * ss);
}

EnergyForces CdmdPotential::evaluate(std::span<const Vec3> coords, std::span<const double> weights) const {
  const VoxelGrid sim = simulate_density(coords, weights, spec_);
  const auto e = exp_->values();
  const auto s = sim.values();
  const double es = deterministic_sum(e.size(), [&](std::size_t i) { return e[i] * s[i]; });
  const double ss = deterministic_sum(s.size(), [&](std::size_t i) { return s[i] * s[i]; });
  if (ss == 0.0) throw DataError("CDMD: simulated map is all zero (atoms outside the grid)");
  const double denom = std::sqrt(exp_norm2_ * ss);
  const double corr = es / denom;

  EnergyForces out{k_ * (1.0 - corr), std::vector<Vec3>(coords.size())};
  const double sigma = spec_.kernel_sigma();
  const double cutoff2 = std::pow(spec_.truncation_sigmas * sigma, 2);
  const double cutoff = std::sqrt(cutoff2);
  const double ratio = es / ss;
  const auto& d = spec_.dims;

  // dccc/ds_v = (e_v - ratio * s_v) / denom; ds_v/dr_a = -2 w g'(d2) (v - r_a).
  parallel_for(coords.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      const Vec3& r = coords[a];
      int lo[3], hi[3];
      for (int ax = 0; ax < 3; ++ax) {
        lo[ax] = std::max(0, static_cast<int>(std::ceil((r[ax] - cutoff - spec_.origin[ax]) / spec_.spacing[ax])));
        hi[ax] = std::min(d[ax] - 1, static_cast<int>(std::floor((r[ax] + cutoff - spec_.origin[ax]) / spec_.spacing[ax])));
      }
      Vec3 grad{};
      for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
          for (int i = lo[0]; i <= hi[0]; ++i) {
            const Vec3 dv = sim.position(i, j, k) - r;
            const double d2 = norm2(dv);
            if (d2 > cutoff2) continue;
            const std::size_t v = sim.linear(i, j, k);
            const double dccc_ds = (e[v] - ratio * s[v]) / denom;
            grad -= dv * (2.0 * dccc_ds * weights[a] * density_kernel(d2, spec_).d_dr2);
          }
      out.forces[a] = grad * k_;
    }
  });
  return out;
}

EnergyForces cdmd_energy_forces(std::span<const Vec3> coords, const VoxelGrid& exp_map, double k,
                                const SimulationSpec& spec) {
  const std::vector<double> weights(coords.size(), 1.0);
  return CdmdPotential(exp_map, k, spec).evaluate(coords, weights);
}

EnergyForces bonded_energy_forces(std::span<const Vec3> coords, const Topology& top) {
  if (coords.size() != top.n_particles) throw std::invalid_argument("bonded: particle count mismatch");
  const auto& c = top.constants;
  EnergyForces out{0.0, std::vector<Vec3>(coords.size())};
  double energy = 0.0;

  for (const auto& b : top.bonds) {
    const Vec3 dr = coords[b[1]] - coords[b[0]];
    const double d = norm(dr);
    const double stretch = d - c.bond_length;
    energy += 0.5 * c.k_bond * stretch * stretch;
    if (d > 0.0) {
      const Vec3 f = dr * (c.k_bond * stretch / d);
      out.forces[b[0]] += f;
      out.forces[b[1]] -= f;
    }
  }

  for (const auto& a : top.angles) {
    const Vec3 u = coords[a.i] - coords[a.j];
    const Vec3 v = coords[a.k] - coords[a.j];
    const double lu = norm(u), lv = norm(v);
    if (lu == 0.0 || lv == 0.0) continue;
    const double cos_t = std::clamp(dot(u, v) / (lu * lv), -1.0, 1.0);
    const double theta = std::acos(cos_t);
    const double dev = theta - a.rest;
    energy += 0.5 * c.k_angle * dev * dev;
    const double sin_t = std::max(std::sqrt(1.0 - cos_t * cos_t), 1e-8);
    const Vec3 uh = u / lu, vh = v / lv;
    const Vec3 dcos_di = (vh - uh * cos_t) / lu;
    const Vec3 dcos_dk = (uh - vh * cos_t) / lv;
    const double scale = c.k_angle * dev / sin_t;
    out.forces[a.i] += dcos_di * scale;
    out.forces[a.k] += dcos_dk * scale;
    out.forces[a.j] -= (dcos_di + dcos_dk) * scale;
  }

  const double contact = 2.0 * c.rep_radius;
  const double contact2 = contact * contact;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t j = i + 1; j < coords.size(); ++j) {
      const Vec3 dr = coords[i] - coords[j];
      const double d2 = norm2(dr);
      if (d2 >= contact2 || top.is_excluded(i, j)) continue;
      const double d = std::sqrt(d2);
      const double overlap = contact - d;
      energy += 0.5 * c.k_rep * overlap * overlap;
      if (d > 0.0) {
        const Vec3 f = dr * (c.k_rep * overlap / d);
        out.forces[i] += f;
        out.forces[j] -= f;
      }
    }
  }
  out.energy = energy;
  return out;
}

EnergyForces positional_restraints(std::span<const Vec3> coords, std::span<const Vec3> ref,
                                   std::span<const std::uint8_t> atom_mask, double k_pos) {
  if (ref.size() != coords.size() || atom_mask.size() != coords.size())
    throw std::invalid_argument("positional_restraints: size mismatch");
  EnergyForces out{0.0, std::vector<Vec3>(coords.size())};
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!atom_mask[i]) continue;
    const Vec3 d = coords[i] - ref[i];
    out.energy += 0.5 * k_pos * norm2(d);
    out.forces[i] = d * (-k_pos);
  }
  return out;
}

FitConfig FitConfig::defaults() {
  FitConfig cfg;
  StageSpec tmd;
  tmd.name = "tmd";
  tmd.tmd = true;
  tmd.tmd_steps = 600;
  tmd.max_steps = 1200;
  StageSpec backbone;
  backbone.name = "mdff_backbone";
  backbone.map = MapSource::Backbone;
  backbone.restrain = RestraintSet::TmdAtoms;
  backbone.max_steps = 300;
  StageSpec experimental;
  experimental.name = "mdff_experimental";
  experimental.map = MapSource::Experimental;
  experimental.restrain = RestraintSet::All;
  experimental.max_steps = 300;
  cfg.stages = {tmd, backbone, experimental};
  return cfg;
}

std::vector<TmdTarget> correspondences_from_alignment(const Structure& initial,
                                                      const std::vector<LabeledFragment>& accepted,
                                                      std::span<const int> first_author_index) {
  const auto refs = particle_refs(initial);
  std::vector<TmdTarget> out;
  for (const auto& lf : accepted) {
    if (lf.sequence_index >= initial.chains.size() || lf.sequence_index >= first_author_index.size()) continue;
    for (std::size_t k = 0; k < lf.fragment.size(); ++k) {
      const int author = first_author_index[lf.sequence_index] + static_cast<int>(lf.start_index + k);
      for (std::size_t p = 0; p < refs.size(); ++p) {
        if (refs[p].chain != lf.sequence_index) continue;
        if (initial.chains[refs[p].chain].residues[refs[p].residue].seq_num != author) continue;
        out.push_back({p, lf.fragment.residues[k].position});
        break;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const TmdTarget& a, const TmdTarget& b) { return a.particle < b.particle; });
  return out;
}

namespace {

struct Breakdown {
  double bonded = 0.0, tmd = 0.0, map = 0.0, restraint = 0.0;
  std::vector<Vec3> forces;
  double total() const { return bonded + tmd + map + restraint; }
};

class StageRunner {
 public:
  StageRunner(const StageSpec& stage, const FitConfig& config, const Topology& top, const FitProblem& problem,
              std::span<const Vec3> start)
      : stage_(stage), config_(config), top_(top), n_(start.size()), weights_(n_, 1.0), all_(n_, 1) {
    if (stage.tmd || stage.restrain == RestraintSet::TmdAtoms) {
      if (problem.targets.empty()) throw DataError("fitting: stage '" + stage.name + "' needs fragment correspondences");
      for (const auto& t : problem.targets) {
        tmd_.atom_ids.push_back(t.particle);
        tmd_.targets.push_back(t.target);
      }
      tmd_.h = config.tmd_h;
      tmd_.t_total = std::max(1, stage.tmd_steps);
      tmd_.d0 = tmd_distance(start, tmd_);
      tmd_.validate();
    }
    const VoxelGrid* map = nullptr;
    if (stage.map == MapSource::Backbone) map = problem.backbone_map ? &*problem.backbone_map : nullptr;
    if (stage.map == MapSource::Experimental) map = problem.experimental_map ? &*problem.experimental_map : nullptr;
    if (map) {
      map_ = map;
      sim_spec_ = SimulationSpec::on_lattice_of(*map, stage.resolution);
      if (stage.potential == MapPotentialKind::Mdff) mdff_.emplace(*map, stage.k_map);
      else cdmd_.emplace(*map, stage.k_map, sim_spec_);
    }
    restrain_mask_.assign(n_, 0);
    if (stage.restrain == RestraintSet::All) restrain_mask_.assign(n_, 1);
    if (stage.restrain == RestraintSet::TmdAtoms)
      for (std::size_t id : tmd_.atom_ids) restrain_mask_[id] = 1;
    restrain_ref_.assign(start.begin(), start.end());
  }

  bool has_tmd_atoms() const { return !tmd_.atom_ids.empty(); }

  Breakdown evaluate(std::span<const Vec3> x, int t) const {
    Breakdown b;
    auto bonded = bonded_energy_forces(x, top_);
    b.bonded = bonded.energy;
    b.forces = std::move(bonded.forces);
    auto add = [&](const EnergyForces& ef, double& slot) {
      slot = ef.energy;
      for (std::size_t i = 0; i < n_; ++i) b.forces[i] += ef.forces[i];
    };
    if (stage_.tmd) add(tmd_energy_forces(x, tmd_, t), b.tmd);
    if (mdff_) add(mdff_->evaluate(x, all_), b.map);
    if (cdmd_) add(cdmd_->evaluate(x, weights_), b.map);
    if (stage_.restrain != RestraintSet::None) add(positional_restraints(x, restrain_ref_, restrain_mask_, stage_.k_pos), b.restraint);
    return b;
  }

  LogRecord record(std::span<const Vec3> x, int step, const Breakdown& b) const {
    LogRecord r;
    r.stage = stage_.name;
    r.step = step;
    r.bonded = b.bonded;
    r.tmd = b.tmd;
    r.map = b.map;
    r.restraint = b.restraint;
    r.total = b.total();
    if (has_tmd_atoms()) r.rmsd_to_target = tmd_distance(x, tmd_) / std::sqrt(static_cast<double>(tmd_.atom_ids.size()));
    if (map_) {
      if (cdmd_) r.ccc = cdmd_->correlation(x, weights_);
      else r.ccc = ccc(*map_, simulate_density(x, weights_, sim_spec_));
    }
    for (const auto& f : b.forces) r.max_force = std::max(r.max_force, norm(f));
    for (std::size_t i = 0; i < n_; ++i)
      if (restrain_mask_[i]) r.max_restrained_displacement = std::max(r.max_restrained_displacement, distance(x[i], restrain_ref_[i]));
    return r;
  }

  double current_ccc(std::span<const Vec3> x) const {
    if (cdmd_) return cdmd_->correlation(x, weights_);
    return ccc(*map_, simulate_density(x, weights_, sim_spec_));
  }

  bool tmd_satisfied(std::span<const Vec3> x, int t) const {
    if (!stage_.tmd) return true;
    return t >= tmd_.t_total || tmd_distance(x, tmd_) <= 1e-6;
  }

  bool has_map() const { return map_ != nullptr; }

 private:
  const StageSpec& stage_;
  const FitConfig& config_;
  const Topology& top_;
  std::size_t n_;
  std::vector<double> weights_;
  std::vector<std::uint8_t> all_;
  TmdRestraint tmd_;
  const VoxelGrid* map_ = nullptr;
  SimulationSpec sim_spec_;
  std::optional<MdffPotential> mdff_;
  std::optional<CdmdPotential> cdmd_;
  std::vector<std::uint8_t> restrain_mask_;
  std::vector<Vec3> restrain_ref_;
};

double max_norm(const std::vector<Vec3>& v) {
  double m = 0.0;
  for (const auto& f : v) m = std::max(m, norm(f));
  return m;
}

void check_finite(const Breakdown& b, const FitConfig& config, const std::string& stage, int step) {
  const double e = b.total();
  if (!std::isfinite(e) || std::abs(e) > config.divergence_limit)
    throw NumericalError("fitting diverged in stage '" + stage + "' at step " + std::to_string(step) +
                         " (energy " + std::to_string(e) + ")");
  for (const auto& f : b.forces)
    if (!std::isfinite(f.x) || !std::isfinite(f.y) || !std::isfinite(f.z))
      throw NumericalError("fitting produced non-finite forces in stage '" + stage + "'");
}

// Displacement step * f limited to max_disp per particle.
std::vector<Vec3> capped_step(const std::vector<Vec3>& f, double step, double max_disp) {
  std::vector<Vec3> d(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    d[i] = f[i] * step;
    const double len = norm(d[i]);
    if (len > max_disp) d[i] *= max_disp / len;
  }
  return d;
}

}  // namespace

FitResult run_fitting(const FitProblem& problem, const FitConfig& config) {
  if (!(config.friction > 0.0 && config.friction <= 1.0)) throw std::invalid_argument("fitting: friction must lie in (0,1]");
  if (!(config.step_size > 0.0) || !(config.max_displacement > 0.0))
    throw std::invalid_argument("fitting: step size and displacement cap must be positive");
  if (config.log_interval < 1) throw std::invalid_argument("fitting: log_interval must be >= 1");

  const Topology top = build_topology(problem.initial, config.constants);
  std::vector<Vec3> x = particle_positions(problem.initial);
  if (x.empty()) throw DataError("fitting: initial structure has no CA atoms");
  for (const auto& t : problem.targets)
    if (t.particle >= x.size()) throw DataError("fitting: correspondence refers to a missing particle");

  FitResult result;
  for (const auto& stage : config.stages) {
    StageSummary summary{stage.name, 0, "step_budget", 0.0};
    if (stage.map == MapSource::Experimental && !problem.experimental_map) {
      summary.termination = "skipped";
      result.stages.push_back(summary);
      continue;
    }
    if (stage.map == MapSource::Backbone && !problem.backbone_map)
      throw DataError("fitting: stage '" + stage.name + "' needs a backbone map");

    const StageRunner runner(stage, config, top, problem, x);
    const bool minimise = config.friction >= 1.0;
    std::vector<Vec3> v(x.size());
    double trial_step = config.step_size;

    Breakdown b = runner.evaluate(x, 0);
    int step = 0;
    for (;; ++step) {
      check_finite(b, config, stage.name, step);
      const bool log_now = step % config.log_interval == 0;
      if (log_now) result.log.push_back(runner.record(x, step, b));

      if (max_norm(b.forces) < stage.force_tolerance && runner.tmd_satisfied(x, step)) {
        summary.termination = "converged";
        break;
      }
      if (stage.ccc_target > 0.0 && runner.has_map() && runner.current_ccc(x) >= stage.ccc_target) {
        summary.termination = "ccc_target";
        break;
      }
      if (step >= stage.max_steps) break;

      if (minimise) {
        // Steepest descent with backtracking: never accept an energy rise
        // on the potential of the current schedule time.
        bool accepted = false;
        for (int tries = 0; tries < 40 && !accepted; ++tries) {
          const auto d = capped_step(b.forces, trial_step, config.max_displacement);
          std::vector<Vec3> trial = x;
          for (std::size_t i = 0; i < x.size(); ++i) trial[i] += d[i];
          const Breakdown bt = runner.evaluate(trial, step);
          if (std::isfinite(bt.total()) && bt.total() <= b.total()) {
            x = std::move(trial);
            accepted = true;
            trial_step = std::min(trial_step * 1.2, config.step_size);
          } else {
            trial_step *= 0.5;
          }
        }
        if (!accepted) {
          summary.termination = "converged";
          break;
        }
      } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
          v[i] = v[i] * (1.0 - config.friction) + b.forces[i] * config.step_size;
          const double len = norm(v[i]);
          if (len > config.max_displacement) v[i] *= config.max_displacement / len;
          x[i] += v[i];
        }
      }
      b = runner.evaluate(x, step + 1);
    }
    if (step % config.log_interval != 0) result.log.push_back(runner.record(x, step, b));
    summary.steps = step;
    summary.final_energy = b.total();
    result.stages.push_back(summary);
  }
  result.final_structure = apply_positions(problem.initial, x);
  return result;
}

}  // namespace cryofit
