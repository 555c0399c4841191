#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "cryofit/features.hpp"
#include "cryofit/synthetic.hpp"
#include "cryofit/tracing.hpp"

using namespace cryofit;

namespace {

CaCandidate cand(Index3 cell, Vec3 pos, Vec3 ppv) {
  CaCandidate c;
  c.cell = cell;
  c.position = pos;
  c.ppv = ppv;
  c.aa.fill(0.05);
  c.score = 1.0;
  return c;
}

// Straight chain along x starting at `start`; the last residue points nowhere useful.
std::vector<CaCandidate> line(Vec3 start, int n, int tag) {
  std::vector<CaCandidate> out;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = start + Vec3{3.8 * i, 0, 0};
    out.push_back(cand({i, tag, 0}, p, i + 1 < n ? Vec3{3.8, 0, 0} : Vec3{0, 0, -3.9}));
  }
  return out;
}

Fragment frag_of(std::size_t n) {
  Fragment f;
  for (std::size_t i = 0; i < n; ++i) f.residues.push_back(cand({static_cast<int>(i), 0, 0}, {}, {}));
  return f;
}

}  // namespace

TEST_CASE("tracing: criterion on a single pair") {
  const auto q = cand({0, 0, 0}, {0, 0, 0}, {3.8, 0, 0});
  const auto p = cand({1, 0, 0}, {3.8, 0, 0}, {0, 0, 4});
  CHECK(link_residual_sq(q, p) == 0.0);
  const auto frags = trace_fragments({p, q});
  REQUIRE(frags.size() == 1);
  REQUIRE(frags[0].size() == 2);
  CHECK(frags[0].residues[0].position == q.position);
  CHECK(frags[0].residues[1].position == p.position);
}

TEST_CASE("tracing: ideal labels recover the chain exactly") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SyntheticProtein prot = make_synthetic_protein(10 + 20 * seed, seed, 0);
    const FeatureGrids g = generate_labels(prot.structure, grid_spec_for(prot.structure));
    const auto cands = extract_candidates(g, 0.5);
    const auto truth = ca_positions(prot.structure.chains[0]);
    REQUIRE(cands.size() == truth.size());
    const auto frags = trace_fragments(cands);
    REQUIRE(frags.size() == 1);
    REQUIRE(frags[0].size() == truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(distance(frags[0].residues[i].position, truth[i]) < 1e-9);
  }
}

TEST_CASE("tracing: parallel chains do not cross-link") {
  auto a = line({0, 0, 0}, 6, 0), b = line({0, 10, 0}, 6, 5);
  std::vector<CaCandidate> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const auto frags = trace_fragments(all);
  REQUIRE(frags.size() == 2);
  for (const auto& f : frags) {
    CHECK(f.size() == 6);
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
      CHECK(link_residual_sq(f.residues[i], f.residues[i + 1]) <= 1.0);
      CHECK(f.residues[i].position.y == f.residues[i + 1].position.y);
    }
  }
}

TEST_CASE("tracing: result independent of input order, partition of candidates") {
  const SyntheticProtein prot = make_synthetic_protein(50, 9, 0);
  const FeatureGrids labels = generate_labels(prot.structure, grid_spec_for(prot.structure));
  NoiseSpec n;
  n.ca_dropout = 0.1;
  n.fp_rate = 20;
  n.offset_jitter_sigma = 0.2;
  n.ppv_jitter_sigma = 0.2;
  n.seed = 5;
  NoiseLog log;
  const FeatureGrids g = inject_noise(labels, n, &log);
  auto cands = extract_candidates(g, 0.5);

  std::size_t fp_above = 0;
  for (auto c : log.false_positive_cells) fp_above += g.ca_prob.values()[c] >= 0.5;
  CHECK(cands.size() == 50 - log.dropped_cells.size() + fp_above);

  const auto ref = trace_fragments(cands);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(cands.begin(), cands.end(), rng);
    const auto again = trace_fragments(cands);
    REQUIRE(again.size() == ref.size());
    for (std::size_t f = 0; f < ref.size(); ++f) {
      REQUIRE(again[f].size() == ref[f].size());
      for (std::size_t i = 0; i < ref[f].size(); ++i) CHECK(again[f].residues[i].cell == ref[f].residues[i].cell);
    }
  }
  std::set<Index3> seen;
  std::size_t total = 0;
  for (const auto& f : ref) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      seen.insert(f.residues[i].cell);
      if (i + 1 < f.size()) {
        CHECK(link_residual_sq(f.residues[i], f.residues[i + 1]) <= 1.0);
        const double d = distance(f.residues[i].position, f.residues[i + 1].position);
        CHECK(d > 2.0);
        CHECK(d < 4.5);
      }
    }
    total += f.size();
  }
  CHECK(total == cands.size());
  CHECK(seen.size() == cands.size());
}

TEST_CASE("tracing: cycles are cut at the worst link") {
  // Four candidates on a square with side 3.8, each pointing at the next.
  const Vec3 p0{0, 0, 0}, p1{3.8, 0, 0}, p2{3.8, 3.8, 0}, p3{0, 3.8, 0};
  std::vector<CaCandidate> c{cand({0, 0, 0}, p0, p1 - p0), cand({1, 0, 0}, p1, p2 - p1), cand({1, 1, 0}, p2, p3 - p2),
                             cand({0, 1, 0}, p3, p0 - p3 + Vec3{0.3, 0, 0})};
  const auto frags = trace_fragments(c);
  REQUIRE(frags.size() == 1);
  REQUIRE(frags[0].size() == 4);
  CHECK(frags[0].residues.front().position == p0);
  CHECK(frags[0].residues.back().position == p3);
}

TEST_CASE("tracing: candidates and thresholds") {
  const SyntheticProtein prot = make_synthetic_protein(10, 12, 0);
  const FeatureGrids g = generate_labels(prot.structure, grid_spec_for(prot.structure));
  const auto cands = extract_candidates(g, 0.5);
  CHECK(cands.size() == 10);
  CHECK_THROWS_AS(extract_candidates(g, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(extract_candidates(g, 0.0), std::invalid_argument);
  TraceOptions bad;
  bad.epsilon_sq = 0.0;
  CHECK_THROWS_AS(trace_fragments(cands, bad), std::invalid_argument);
}

TEST_CASE("pruning") {
  std::vector<Fragment> f{frag_of(1), frag_of(2), frag_of(3), frag_of(7)};
  CHECK(prune_fragments(f, 1).size() == 4);
  const auto kept = prune_fragments(f, 3);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].size() == 3);
  CHECK(kept[1].size() == 7);
  CHECK_THROWS(prune_fragments(f, 0));
}

TEST_CASE("fragment export") {
  CHECK(fragment_chain_id(0) == "A");
  CHECK(fragment_chain_id(25) == "Z");
  CHECK(fragment_chain_id(26) == "AA");
  CHECK(fragment_chain_id(701) == "ZZ");
  CHECK_THROWS(fragment_chain_id(702));

  auto a = line({1, 2, 3}, 4, 0);
  a[2].aa = {};
  a[2].aa[static_cast<int>(AminoAcid::W)] = 1.0;
  std::vector<Fragment> frags{Fragment{a}, frag_of(2)};
  const Structure s = fragments_to_structure(frags);
  REQUIRE(s.chains.size() == 2);
  CHECK(s.chains[0].residues[2].aa == AminoAcid::W);
  CHECK(s.chains[0].residues[0].seq_num == 1);

  const auto back = fragments_from_json(fragments_to_json(frags));
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(back[0].residues[i].position == a[i].position);
    CHECK(back[0].residues[i].ppv == a[i].ppv);
    CHECK(back[0].residues[i].aa == a[i].aa);
    CHECK(back[0].residues[i].cell == a[i].cell);
  }
}
