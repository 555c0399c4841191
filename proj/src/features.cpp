#include "cryofit/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "cryofit/errors.hpp"
#include "cryofit/parallel.hpp"

namespace cryofit {

namespace {

constexpr double kMaxPpvLength = 4.0;
constexpr double kBackboneLabelRadius = 1.2;
constexpr double kUniformAa = 1.0 / kNumAminoAcids;

bool is_backbone_atom(const std::string& name) { return name == "N" || name == "CA" || name == "C" || name == "O"; }

}  // namespace

GridSpec grid_spec_for(const Structure& structure, double padding, double fine_spacing) {
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  bool any = false;
  for (const auto& c : structure.chains)
    for (const auto& r : c.residues)
      for (const auto& a : r.atoms) {
        any = true;
        for (int ax = 0; ax < 3; ++ax) {
          lo[ax] = std::min(lo[ax], a.position[ax]);
          hi[ax] = std::max(hi[ax], a.position[ax]);
        }
      }
  if (!any) throw DataError("grid_spec_for: structure has no atoms");
  GridSpec spec;
  spec.fine_spacing = fine_spacing;
  for (int ax = 0; ax < 3; ++ax) {
    spec.origin[ax] = std::floor((lo[ax] - padding) / fine_spacing) * fine_spacing;
    int n = static_cast<int>(std::ceil((hi[ax] + padding - spec.origin[ax]) / fine_spacing)) + 1;
    spec.fine_dims[ax] = n + (n % 2);
  }
  return spec;
}

Vec3 FeatureGrids::cell_corner(std::size_t cell) const {
  const auto idx = ca_prob.unlinear(cell);
  return ca_prob.position(idx[0], idx[1], idx[2]);
}

Vec3 FeatureGrids::offset(std::size_t cell) const {
  return {ca_offset[0].values()[cell], ca_offset[1].values()[cell], ca_offset[2].values()[cell]};
}

Vec3 FeatureGrids::ppv_at(std::size_t cell) const {
  return {ppv[0].values()[cell], ppv[1].values()[cell], ppv[2].values()[cell]};
}

AaDistribution FeatureGrids::aa_at(std::size_t cell) const {
  AaDistribution p;
  for (int t = 0; t < kNumAminoAcids; ++t) p[t] = aa_dist[t].values()[cell];
  return p;
}

void FeatureGrids::set_offset(std::size_t cell, const Vec3& v) {
  for (int a = 0; a < 3; ++a) ca_offset[a].values()[cell] = v[a];
}

void FeatureGrids::set_ppv(std::size_t cell, const Vec3& v) {
  for (int a = 0; a < 3; ++a) ppv[a].values()[cell] = v[a];
}

void FeatureGrids::set_aa(std::size_t cell, const AaDistribution& p) {
  for (int t = 0; t < kNumAminoAcids; ++t) aa_dist[t].values()[cell] = p[t];
}

void FeatureGrids::validate() const {
  const double s = bb_prob.spacing().x;
  if (bb_prob.spacing() != Vec3{s, s, s}) throw DataError("features: backbone grid spacing must be isotropic");
  if (ca_prob.spacing() != Vec3{2 * s, 2 * s, 2 * s}) throw DataError("features: coarse spacing must be twice the backbone spacing");
  if (ca_prob.origin() != bb_prob.origin()) throw DataError("features: coarse and backbone grids must share an origin");
  for (int a = 0; a < 3; ++a)
    if (ca_prob.dims()[a] != (bb_prob.dims()[a] + 1) / 2) throw DataError("features: coarse dims inconsistent with backbone dims");
  for (const auto& g : ca_offset)
    if (!g.same_lattice(ca_prob)) throw DataError("features: offset grid lattice mismatch");
  for (const auto& g : ppv)
    if (!g.same_lattice(ca_prob)) throw DataError("features: ppv grid lattice mismatch");
  for (const auto& g : aa_dist)
    if (!g.same_lattice(ca_prob)) throw DataError("features: aa grid lattice mismatch");
  if (!ca_mask.empty() && ca_mask.size() != cell_count()) throw DataError("features: ca_mask size mismatch");
  if (!ppv_mask.empty() && ppv_mask.size() != cell_count()) throw DataError("features: ppv_mask size mismatch");

  for (double v : bb_prob.values())
    if (v < 0.0 || v > 1.0) throw DataError("features: bb_prob outside [0,1]");
  for (std::size_t c = 0; c < cell_count(); ++c) {
    const double p = ca_prob.values()[c];
    if (p < 0.0 || p > 1.0) throw DataError("features: ca_prob outside [0,1]");
    const Vec3 o = offset(c), v = ppv_at(c);
    for (int a = 0; a < 3; ++a) {
      if (o[a] < 0.0 || o[a] > 2.0 * s) throw DataError("features: Cα offset outside the cell");
      if (v[a] < -kMaxPpvLength || v[a] > kMaxPpvLength) throw DataError("features: PPV outside [-4,4]");
    }
    double sum = 0.0;
    for (int t = 0; t < kNumAminoAcids; ++t) {
      const double q = aa_dist[t].values()[c];
      if (q < 0.0) throw DataError("features: negative AA probability");
      sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw DataError("features: AA distribution does not sum to 1");
  }
}

FeatureGrids generate_labels(const Structure& structure, const GridSpec& spec) {
  const double cs = spec.coarse_spacing();
  const Vec3 coarse_spacing{cs, cs, cs};
  const Index3 cd = spec.coarse_dims();

  FeatureGrids g;
  g.bb_prob = VoxelGrid(spec.fine_dims, {spec.fine_spacing, spec.fine_spacing, spec.fine_spacing}, spec.origin);
  g.ca_prob = VoxelGrid(cd, coarse_spacing, spec.origin);
  for (auto& o : g.ca_offset) o = VoxelGrid(cd, coarse_spacing, spec.origin);
  for (auto& v : g.ppv) v = VoxelGrid(cd, coarse_spacing, spec.origin);
  for (auto& p : g.aa_dist) p = VoxelGrid(cd, coarse_spacing, spec.origin, kUniformAa);
  g.ca_mask.assign(g.cell_count(), 0);
  g.ppv_mask.assign(g.cell_count(), 0);

  for (const auto& chain : structure.chains) {
    const auto& res = chain.residues;
    for (std::size_t r = 0; r < res.size(); ++r) {
      const Atom* ca = res[r].ca();
      if (!ca) throw DataError("labels: residue " + std::to_string(res[r].seq_num) + " of chain '" + chain.id + "' has no CA");
      Index3 cell;
      for (int a = 0; a < 3; ++a) cell[a] = static_cast<int>(std::floor((ca->position[a] - spec.origin[a]) / cs));
      if (!g.ca_prob.contains_index(cell[0], cell[1], cell[2]))
        throw DataError("labels: Cα of residue " + std::to_string(res[r].seq_num) + " lies outside the grid");
      const std::size_t c = g.ca_prob.linear(cell[0], cell[1], cell[2]);
      if (g.ca_mask[c]) throw DataError("labels: two Cα atoms fall into one coarse cell");
      g.ca_mask[c] = 1;
      g.ca_prob.values()[c] = 1.0;
      g.set_offset(c, ca->position - g.cell_corner(c));
      AaDistribution one{};
      one[static_cast<int>(res[r].aa)] = 1.0;
      g.set_aa(c, one);

      if (r + 1 < res.size() && res[r + 1].seq_num == res[r].seq_num + 1) {
        if (const Atom* next = res[r + 1].ca()) {
          const Vec3 v = next->position - ca->position;
          if (norm(v) <= kMaxPpvLength) {
            g.set_ppv(c, v);
            g.ppv_mask[c] = 1;
          }
        }
      }
    }
  }

  // Backbone voxels: centres within the label radius of any N/CA/C/O atom.
  const double r2 = kBackboneLabelRadius * kBackboneLabelRadius;
  const double fs = spec.fine_spacing;
  const int reach = static_cast<int>(std::ceil(kBackboneLabelRadius / fs));
  for (const auto& chain : structure.chains)
    for (const auto& res : chain.residues)
      for (const auto& atom : res.atoms) {
        if (!is_backbone_atom(atom.name)) continue;
        int center[3];
        for (int a = 0; a < 3; ++a) center[a] = static_cast<int>(std::lround((atom.position[a] - spec.origin[a]) / fs));
        for (int k = center[2] - reach; k <= center[2] + reach; ++k)
          for (int j = center[1] - reach; j <= center[1] + reach; ++j)
            for (int i = center[0] - reach; i <= center[0] + reach; ++i) {
              if (!g.bb_prob.contains_index(i, j, k)) continue;
              if (norm2(g.bb_prob.position(i, j, k) - atom.position) <= r2) g.bb_prob.at(i, j, k) = 1.0;
            }
      }
  return g;
}

void NoiseSpec::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(ca_dropout)) throw std::invalid_argument("NoiseSpec: ca_dropout must lie in [0,1]");
  if (!(dropout_correlation >= 0.0 && dropout_correlation < 1.0))
    throw std::invalid_argument("NoiseSpec: dropout_correlation must lie in [0,1)");
  if (!(fp_rate >= 0.0 && fp_rate <= 1000.0)) throw std::invalid_argument("NoiseSpec: fp_rate must lie in [0,1000]");
  if (offset_jitter_sigma < 0 || ppv_jitter_sigma < 0 || aa_dirichlet_alpha < 0 || bb_noise_sigma < 0 || score_sigma < 0)
    throw std::invalid_argument("NoiseSpec: noise scales must be non-negative");
}

namespace {

// Coarse cell containing the successor of `cell` according to its label
// PPV, or npos. Uses the neighbouring cells when the target sits on a
// boundary and rounding moved it across.
std::size_t successor_cell(const FeatureGrids& g, std::size_t cell) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  if (!g.ppv_mask[cell]) return npos;
  const Vec3 target = g.cell_corner(cell) + g.offset(cell) + g.ppv_at(cell);
  const double cs = g.ca_prob.spacing().x;
  Index3 base;
  for (int a = 0; a < 3; ++a) base[a] = static_cast<int>(std::floor((target[a] - g.ca_prob.origin()[a]) / cs));
  std::size_t best = npos;
  double best_d2 = 1e-6;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int i = base[0] + dx, j = base[1] + dy, k = base[2] + dz;
        if (!g.ca_prob.contains_index(i, j, k)) continue;
        const std::size_t c = g.ca_prob.linear(i, j, k);
        if (!g.ca_mask[c] || c == cell) continue;
        const double d2 = norm2(g.cell_corner(c) + g.offset(c) - target);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
  return best;
}

// True Cα cells grouped into chains following the label PPVs.
std::vector<std::vector<std::size_t>> label_chains(const FeatureGrids& g) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  const std::size_t n = g.cell_count();
  std::vector<std::size_t> next(n, npos);
  std::vector<std::uint8_t> has_pred(n, 0);
  for (std::size_t c = 0; c < n; ++c) {
    if (!g.ca_mask[c]) continue;
    next[c] = successor_cell(g, c);
    if (next[c] != npos) has_pred[next[c]] = 1;
  }
  std::vector<std::vector<std::size_t>> chains;
  std::vector<std::uint8_t> visited(n, 0);
  for (std::size_t c = 0; c < n; ++c) {
    if (!g.ca_mask[c] || has_pred[c]) continue;
    auto& chain = chains.emplace_back();
    for (std::size_t x = c; x != npos && !visited[x]; x = next[x]) {
      visited[x] = 1;
      chain.push_back(x);
    }
  }
  for (std::size_t c = 0; c < n; ++c)
    if (g.ca_mask[c] && !visited[c]) chains.push_back({c});
  return chains;
}

AaDistribution dirichlet(std::mt19937_64& rng, const AaDistribution& alpha) {
  AaDistribution p;
  double sum = 0.0;
  for (int t = 0; t < kNumAminoAcids; ++t) {
    p[t] = alpha[t] > 0.0 ? std::gamma_distribution<double>(alpha[t], 1.0)(rng) : 0.0;
    sum += p[t];
  }
  if (sum <= 0.0) {
    p.fill(kUniformAa);
    return p;
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

FeatureGrids inject_noise(const FeatureGrids& labels, const NoiseSpec& spec, NoiseLog* log) {
  spec.validate();
  if (labels.ca_mask.size() != labels.cell_count() || labels.ppv_mask.size() != labels.cell_count())
    throw std::invalid_argument("inject_noise: labels must carry ca_mask and ppv_mask");

  FeatureGrids out = labels;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double cs = labels.ca_prob.spacing().x;

  // Losses along each chain follow a two-state Markov chain whose
  // stationary loss probability is ca_dropout.
  std::vector<std::uint8_t> dropped(labels.cell_count(), 0);
  if (spec.ca_dropout > 0.0) {
    const double p = spec.ca_dropout;
    const double stay_lost = p + spec.dropout_correlation * (1.0 - p);
    const double become_lost = p * (1.0 - spec.dropout_correlation);
    for (const auto& chain : label_chains(labels)) {
      bool lost = false;
      for (std::size_t k = 0; k < chain.size(); ++k) {
        const double u = uniform(rng);
        lost = k == 0 ? u < p : (lost ? u < stay_lost : u < become_lost);
        dropped[chain[k]] = lost ? 1 : 0;
      }
    }
  }

  const double fp_prob = spec.fp_rate / 1000.0;
  AaDistribution fp_alpha;
  fp_alpha.fill(spec.aa_dirichlet_alpha);

  for (std::size_t c = 0; c < labels.cell_count(); ++c) {
    if (labels.ca_mask[c]) {
      if (dropped[c]) {
        out.ca_prob.values()[c] = 0.0;
        out.set_offset(c, {});
        out.set_ppv(c, {});
        AaDistribution u;
        u.fill(kUniformAa);
        out.set_aa(c, u);
        out.ca_mask[c] = 0;
        out.ppv_mask[c] = 0;
        if (log) log->dropped_cells.push_back(c);
        continue;
      }
      if (spec.score_sigma > 0.0)
        out.ca_prob.values()[c] = std::clamp(1.0 - std::abs(spec.score_sigma * normal(rng)), 0.0, 1.0);
      if (spec.offset_jitter_sigma > 0.0) {
        Vec3 o = labels.offset(c);
        for (int a = 0; a < 3; ++a) o[a] = std::clamp(o[a] + spec.offset_jitter_sigma * normal(rng), 0.0, cs);
        out.set_offset(c, o);
      }
      if (spec.ppv_jitter_sigma > 0.0 && labels.ppv_mask[c]) {
        Vec3 v = labels.ppv_at(c);
        for (int a = 0; a < 3; ++a)
          v[a] = std::clamp(v[a] + spec.ppv_jitter_sigma * normal(rng), -kMaxPpvLength, kMaxPpvLength);
        out.set_ppv(c, v);
      }
      if (spec.aa_dirichlet_alpha > 0.0) {
        AaDistribution alpha = fp_alpha;
        const auto truth = labels.aa_at(c);
        for (int t = 0; t < kNumAminoAcids; ++t) alpha[t] += truth[t];
        out.set_aa(c, dirichlet(rng, alpha));
      }
    } else if (fp_prob > 0.0 && uniform(rng) < fp_prob) {
      out.ca_prob.values()[c] = uniform(rng);
      Vec3 o;
      for (int a = 0; a < 3; ++a) o[a] = cs * uniform(rng);
      out.set_offset(c, o);
      // Random direction, length up to the PPV range.
      const double cos_t = 2.0 * uniform(rng) - 1.0;
      const double phi = 2.0 * std::numbers::pi * uniform(rng);
      const double len = kMaxPpvLength * uniform(rng);
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
      out.set_ppv(c, Vec3{sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t} * len);
      if (spec.aa_dirichlet_alpha > 0.0) out.set_aa(c, dirichlet(rng, fp_alpha));
      if (log) log->false_positive_cells.push_back(c);
    }
  }

  if (spec.bb_noise_sigma > 0.0)
    for (double& v : out.bb_prob.values()) v = std::clamp(v + spec.bb_noise_sigma * normal(rng), 0.0, 1.0);
  return out;
}

double dice_loss(std::span<const double> pred, std::span<const double> label) {
  if (pred.size() != label.size()) throw std::invalid_argument("dice_loss: size mismatch");
  const std::size_t n = pred.size();
  const double xy = deterministic_sum(n, [&](std::size_t i) { return pred[i] * label[i]; });
  const double xx = deterministic_sum(n, [&](std::size_t i) { return pred[i] * pred[i]; });
  const double yy = deterministic_sum(n, [&](std::size_t i) { return label[i] * label[i]; });
  return 1.0 - (2.0 * xy + kDiceSmooth) / (xx + yy + kDiceSmooth);
}

double class_balance_weight(std::span<const double> label) {
  if (label.empty()) throw std::invalid_argument("class_balance_weight: empty grid");
  return 1.0 - deterministic_sum(label.size(), [&](std::size_t i) { return label[i]; }) / label.size();
}

double weighted_bce(std::span<const double> pred, std::span<const double> label) {
  if (pred.size() != label.size()) throw std::invalid_argument("weighted_bce: size mismatch");
  const double beta = class_balance_weight(label);
  const double sum = deterministic_sum(pred.size(), [&](std::size_t i) {
    const double x = std::clamp(pred[i], kProbFloor, 1.0 - kProbFloor);
    return beta * label[i] * std::log(x) + (1.0 - beta) * (1.0 - label[i]) * std::log(1.0 - x);
  });
  return -sum / pred.size();
}

double loss_backbone(std::span<const double> pred, std::span<const double> label) { return dice_loss(pred, label); }

double loss_ca_detection(std::span<const double> pred, std::span<const double> label) {
  return dice_loss(pred, label) + weighted_bce(pred, label);
}

namespace {

double masked_vector_mse(std::span<const Vec3> pred, std::span<const Vec3> label, std::span<const std::uint8_t> mask,
                         const char* what) {
  if (pred.size() != label.size() || mask.size() != pred.size())
    throw std::invalid_argument(std::string(what) + ": size mismatch");
  const double count = deterministic_sum(mask.size(), [&](std::size_t i) { return mask[i] ? 1.0 : 0.0; });
  if (count == 0.0) throw std::invalid_argument(std::string(what) + ": empty mask");
  const double sum =
      deterministic_sum(pred.size(), [&](std::size_t i) { return mask[i] ? norm2(pred[i] - label[i]) : 0.0; });
  return sum / count;
}

}  // namespace

double loss_ca_location(std::span<const Vec3> pred, std::span<const Vec3> label, std::span<const std::uint8_t> mask) {
  return masked_vector_mse(pred, label, mask, "loss_ca_location");
}

double loss_ppv(std::span<const Vec3> pred, std::span<const Vec3> label, std::span<const std::uint8_t> mask) {
  return masked_vector_mse(pred, label, mask, "loss_ppv");
}

double loss_aa(std::span<const AaDistribution> pred, std::span<const AaDistribution> label_one_hot,
               std::span<const std::uint8_t> mask) {
  if (pred.size() != label_one_hot.size() || mask.size() != pred.size())
    throw std::invalid_argument("loss_aa: size mismatch");
  const double count = deterministic_sum(mask.size(), [&](std::size_t i) { return mask[i] ? 1.0 : 0.0; });
  if (count == 0.0) throw std::invalid_argument("loss_aa: empty mask");
  const double sum = deterministic_sum(pred.size(), [&](std::size_t i) {
    if (!mask[i]) return 0.0;
    double ce = 0.0;
    for (int t = 0; t < kNumAminoAcids; ++t)
      if (label_one_hot[i][t] != 0.0) ce += label_one_hot[i][t] * std::log(std::max(pred[i][t], kProbFloor));
    return ce;
  });
  return -sum / count;
}

double loss_total(const LossComponents& c, const LossWeights& w) {
  return c.backbone + w.detection * c.detection + w.location * c.location + w.aa * c.aa + w.ppv * c.ppv;
}

std::vector<Vec3> offsets_of(const FeatureGrids& g) {
  std::vector<Vec3> v(g.cell_count());
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = g.offset(c);
  return v;
}

std::vector<Vec3> ppvs_of(const FeatureGrids& g) {
  std::vector<Vec3> v(g.cell_count());
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = g.ppv_at(c);
  return v;
}

std::vector<AaDistribution> aa_of(const FeatureGrids& g) {
  std::vector<AaDistribution> v(g.cell_count());
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = g.aa_at(c);
  return v;
}

LossComponents compute_losses(const FeatureGrids& pred, const FeatureGrids& label) {
  if (!pred.bb_prob.same_lattice(label.bb_prob) || !pred.ca_prob.same_lattice(label.ca_prob))
    throw std::invalid_argument("compute_losses: prediction and label lattices differ");
  LossComponents c;
  c.backbone = loss_backbone(pred.bb_prob.values(), label.bb_prob.values());
  c.detection = loss_ca_detection(pred.ca_prob.values(), label.ca_prob.values());
  c.location = loss_ca_location(offsets_of(pred), offsets_of(label), label.ca_mask);
  c.aa = loss_aa(aa_of(pred), aa_of(label), label.ca_mask);
  c.ppv = loss_ppv(ppvs_of(pred), ppvs_of(label), label.ppv_mask);
  return c;
}

namespace {

std::string aa_file(int t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "aa_%02d.mrc", t);
  return buf;
}

VoxelGrid mask_grid(const std::vector<std::uint8_t>& mask, const VoxelGrid& like) {
  VoxelGrid g(like.dims(), like.spacing(), like.origin());
  for (std::size_t i = 0; i < mask.size(); ++i) g.values()[i] = mask[i] ? 1.0 : 0.0;
  return g;
}

std::vector<std::uint8_t> grid_mask(const VoxelGrid& g) {
  std::vector<std::uint8_t> m(g.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = g.values()[i] > 0.5 ? 1 : 0;
  return m;
}

}  // namespace

void write_feature_dir(const std::filesystem::path& dir, const FeatureGrids& grids) {
  grids.validate();
  std::filesystem::create_directories(dir);
  const char* axes[3] = {"x", "y", "z"};
  nlohmann::ordered_json manifest;
  manifest["format"] = "cryofit-feature-grids";
  manifest["version"] = 1;
  manifest["aa_order"] = std::string(kAminoAcidLetters);
  manifest["backbone_spacing"] = grids.bb_prob.spacing().x;
  manifest["coarse_spacing"] = grids.ca_prob.spacing().x;
  manifest["backbone_dims"] = grids.bb_prob.dims();
  manifest["coarse_dims"] = grids.ca_prob.dims();
  manifest["origin"] = {grids.bb_prob.origin().x, grids.bb_prob.origin().y, grids.bb_prob.origin().z};

  nlohmann::ordered_json files;
  write_mrc_file(dir / "bb_prob.mrc", grids.bb_prob);
  files["bb_prob"] = "bb_prob.mrc";
  write_mrc_file(dir / "ca_prob.mrc", grids.ca_prob);
  files["ca_prob"] = "ca_prob.mrc";
  for (int a = 0; a < 3; ++a) {
    const std::string off = std::string("offset_") + axes[a] + ".mrc";
    const std::string pv = std::string("ppv_") + axes[a] + ".mrc";
    write_mrc_file(dir / off, grids.ca_offset[a]);
    write_mrc_file(dir / pv, grids.ppv[a]);
    files["offset"].push_back(off);
    files["ppv"].push_back(pv);
  }
  for (int t = 0; t < kNumAminoAcids; ++t) {
    write_mrc_file(dir / aa_file(t), grids.aa_dist[t]);
    files["aa"].push_back(aa_file(t));
  }
  if (!grids.ca_mask.empty()) {
    write_mrc_file(dir / "ca_mask.mrc", mask_grid(grids.ca_mask, grids.ca_prob));
    files["ca_mask"] = "ca_mask.mrc";
  }
  if (!grids.ppv_mask.empty()) {
    write_mrc_file(dir / "ppv_mask.mrc", mask_grid(grids.ppv_mask, grids.ca_prob));
    files["ppv_mask"] = "ppv_mask.mrc";
  }
  manifest["files"] = files;
  const std::string text = manifest.dump(2) + "\n";
  write_text_file((dir / "manifest.json").string(), text);
}

FeatureGrids read_feature_dir(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file((dir / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("feature manifest: " + std::string(e.what()));
  }
  try {
    if (manifest.contains("aa_order") && manifest["aa_order"].get<std::string>() != kAminoAcidLetters)
      throw DataError("feature manifest: unsupported AA order");
    const auto& files = manifest.at("files");
    FeatureGrids g;
    g.bb_prob = read_mrc_file(dir / files.at("bb_prob").get<std::string>());
    g.ca_prob = read_mrc_file(dir / files.at("ca_prob").get<std::string>());
    for (int a = 0; a < 3; ++a) {
      g.ca_offset[a] = read_mrc_file(dir / files.at("offset").at(a).get<std::string>());
      g.ppv[a] = read_mrc_file(dir / files.at("ppv").at(a).get<std::string>());
    }
    for (int t = 0; t < kNumAminoAcids; ++t) g.aa_dist[t] = read_mrc_file(dir / files.at("aa").at(t).get<std::string>());
    if (files.contains("ca_mask")) g.ca_mask = grid_mask(read_mrc_file(dir / files["ca_mask"].get<std::string>()));
    if (files.contains("ppv_mask")) g.ppv_mask = grid_mask(read_mrc_file(dir / files["ppv_mask"].get<std::string>()));
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("feature manifest: " + std::string(e.what()));
  }
}

}  // namespace cryofit
