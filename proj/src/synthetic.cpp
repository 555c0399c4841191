#include "cryofit/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cryofit/errors.hpp"

namespace cryofit {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kCaCa = 3.8;
constexpr double kMinNonAdjacent = 4.2;

Vec3 unit(const Vec3& v) { return v / norm(v); }

bool clashes(const std::vector<Vec3>& trace, const Vec3& p) {
  // The last residue is the bonded neighbour of p.
  for (std::size_t i = 0; i + 1 < trace.size(); ++i)
    if (norm2(trace[i] - p) < kMinNonAdjacent * kMinNonAdjacent) return true;
  return false;
}

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c{};
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

std::vector<Vec3> try_trace(std::size_t n, std::mt19937_64& rng) {
  std::vector<Vec3> t{{0, 0, 0}, {kCaCa, 0, 0}};
  t.push_back(t[1] + Vec3{std::cos(std::numbers::pi - 100 * kDeg), std::sin(std::numbers::pi - 100 * kDeg), 0} * kCaCa);
  std::uniform_int_distribution<int> helix_len(7, 14), loop_len(3, 6);
  std::uniform_real_distribution<double> jitter(-4.0, 4.0);

  bool helix = true;
  int remaining = helix_len(rng);
  while (t.size() < n) {
    if (remaining == 0) {
      helix = !helix;
      remaining = helix ? helix_len(rng) : loop_len(rng);
    }
    const std::size_t m = t.size();
    const Vec3 &a = t[m - 3], &b = t[m - 2], &c = t[m - 1];
    bool placed = false;
    if (helix) {
      const Vec3 p = place_next(a, b, c, kCaCa, (91.0 + jitter(rng)) * kDeg, (50.0 + jitter(rng)) * kDeg);
      if (!clashes(t, p)) {
        t.push_back(p);
        placed = true;
      }
    }
    if (!placed) {
      // Loop step: the admissible direction closest to the centroid keeps
      // the chain compact.
      const Vec3 centre = centroid(t);
      const double offset = jitter(rng) * 2.0;
      double best = 1e300;
      Vec3 best_p{};
      for (double theta : {95.0, 110.0, 125.0})
        for (int k = 0; k < 18; ++k) {
          const Vec3 p = place_next(a, b, c, kCaCa, theta * kDeg, (-180.0 + 20.0 * k + offset) * kDeg);
          if (clashes(t, p)) continue;
          const double d = norm2(p - centre);
          if (d < best) {
            best = d;
            best_p = p;
          }
        }
      if (best == 1e300) return {};
      t.push_back(best_p);
    }
    --remaining;
  }
  t.resize(n);
  return t;
}

}  // namespace

Vec3 place_next(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double theta, double phi) {
  const Vec3 bc = unit(c - b);
  const Vec3 nrm = unit(cross(b - a, bc));
  const Vec3 m = cross(nrm, bc);
  const Vec3 d2{-bond * std::cos(theta), bond * std::sin(theta) * std::cos(phi), bond * std::sin(theta) * std::sin(phi)};
  return c + bc * d2.x + m * d2.y + nrm * d2.z;
}

std::vector<Vec3> generate_ca_trace(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("generate_ca_trace: need at least 3 residues");
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 200; ++attempt) {
    auto t = try_trace(n, rng);
    if (!t.empty()) return t;
  }
  throw DataError("generate_ca_trace: could not build a clash-free chain");
}

Chain backbone_from_trace(const std::vector<Vec3>& trace, const std::vector<AminoAcid>& types, const std::string& id,
                          int first_seq_num) {
  if (trace.size() != types.size()) throw std::invalid_argument("backbone_from_trace: size mismatch");
  if (trace.size() < 2) throw std::invalid_argument("backbone_from_trace: need at least 2 residues");
  Chain chain{id, {}};
  const std::size_t n = trace.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& ca = trace[i];
    const Vec3 to_prev = i > 0 ? unit(trace[i - 1] - ca) : unit(ca - trace[i + 1]);
    const Vec3 to_next = i + 1 < n ? unit(trace[i + 1] - ca) : unit(ca - trace[i - 1]);
    Vec3 side = cross(to_prev, to_next);
    if (norm(side) < 1e-6) side = cross(to_next, std::abs(to_next.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0});
    side = unit(side);
    const Vec3 n_atom = ca + unit(to_prev * 0.85 + side * 0.5) * 1.46;
    const Vec3 c_atom = ca + unit(to_next * 0.85 - side * 0.5) * 1.52;
    const Vec3 o_atom = c_atom + unit(side * -1.0 + to_next * 0.3) * 1.23;
    chain.residues.push_back({first_seq_num + static_cast<int>(i), types[i],
                              {{"N", "N", n_atom}, {"CA", "C", ca}, {"C", "C", c_atom}, {"O", "O", o_atom}}});
  }
  return chain;
}

SyntheticProtein make_synthetic_protein(std::size_t n_modeled, std::uint64_t seed, std::size_t tag_length,
                                        const std::string& chain_id) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::uniform_int_distribution<int> pick(0, kNumAminoAcids - 1);
  SyntheticProtein p;
  for (std::size_t i = 0; i < n_modeled + 2 * tag_length; ++i) p.sequence.residues.push_back(static_cast<AminoAcid>(pick(rng)));
  const std::vector<AminoAcid> modeled(p.sequence.residues.begin() + static_cast<std::ptrdiff_t>(tag_length),
                                       p.sequence.residues.begin() + static_cast<std::ptrdiff_t>(tag_length + n_modeled));
  const auto trace = generate_ca_trace(n_modeled, seed);
  p.structure.chains.push_back(
      backbone_from_trace(trace, modeled, chain_id, p.first_author_index + static_cast<int>(tag_length)));
  return p;
}

Structure perturb_structure(const Structure& structure, double target_rmsd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  struct Mode {
    Vec3 k, amp;
    double phase;
  };
  std::vector<Mode> modes;
  for (int m = 0; m < 4; ++m) {
    Vec3 dir{gauss(rng), gauss(rng), gauss(rng)};
    dir = unit(dir) * (2.0 * std::numbers::pi / 50.0);
    modes.push_back({dir, {gauss(rng), gauss(rng), gauss(rng)}, phase(rng)});
  }
  const Vec3 shift{gauss(rng), gauss(rng), gauss(rng)};

  auto field = [&](const Vec3& r) {
    Vec3 u = shift;
    for (const auto& m : modes) u += m.amp * std::sin(dot(m.k, r) + m.phase);
    return u;
  };

  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& c : structure.chains)
    for (const auto& r : c.residues)
      if (const Atom* ca = r.ca()) {
        sum += norm2(field(ca->position));
        ++count;
      }
  if (count == 0 || sum == 0.0) throw DataError("perturb_structure: no CA atoms");
  const double scale = target_rmsd / std::sqrt(sum / static_cast<double>(count));

  Structure out = structure;
  for (auto& c : out.chains)
    for (auto& r : c.residues) {
      const Atom* ca = r.ca();
      if (!ca) continue;
      const Vec3 u = field(ca->position) * scale;
      for (auto& a : r.atoms) a.position += u;
    }
  return out;
}

}  // namespace cryofit
