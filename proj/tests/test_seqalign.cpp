#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cryofit/seqalign.hpp"

using namespace cryofit;

namespace {

Sequence random_sequence(std::mt19937_64& rng, std::size_t n) {
  Sequence s;
  for (std::size_t i = 0; i < n; ++i) s.residues.push_back(static_cast<AminoAcid>(rng() % 20));
  return s;
}

Fragment one_hot_fragment(const Sequence& s, std::size_t start, std::size_t n) {
  Fragment f;
  for (std::size_t k = 0; k < n; ++k) {
    CaCandidate c;
    c.cell = {static_cast<int>(k), 0, 0};
    c.aa = {};
    c.aa[static_cast<int>(s.residues[start + k])] = 1.0;
    f.residues.push_back(c);
  }
  return f;
}

Fragment uniform_fragment(std::size_t n) {
  Fragment f;
  for (std::size_t k = 0; k < n; ++k) {
    CaCandidate c;
    c.aa.fill(1.0 / 20);
    f.residues.push_back(c);
  }
  return f;
}

AaDistribution random_dist(std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.7, 1.0);
  AaDistribution d;
  double s = 0;
  for (auto& x : d) s += (x = g(rng));
  for (auto& x : d) x /= s;
  return d;
}

}  // namespace

TEST_CASE("scores: analytic cases") {
  std::mt19937_64 rng(1);
  const Sequence seq = random_sequence(rng, 40);
  const auto s = alignment_scores(one_hot_fragment(seq, 12, 6), seq);
  CHECK(s.size() == 35);
  CHECK(s[12] == 0.0);
  CHECK(*std::max_element(s.begin(), s.end()) == 0.0);
  for (double v : s) CHECK(v <= 0.0);

  for (double v : alignment_scores(uniform_fragment(5), seq)) CHECK(v == doctest::Approx(-std::log(20.0)));
  CHECK_THROWS_AS(alignment_scores(uniform_fragment(41), seq), std::invalid_argument);
}

TEST_CASE("scores: double-loop oracle and axis permutation") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Sequence seq = random_sequence(rng, 30);
    std::vector<AaDistribution> prof(5);
    for (auto& p : prof) p = random_dist(rng);
    const auto s = alignment_scores(prof, seq);
    REQUIRE(s.size() == 26);
    for (std::size_t i = 0; i < s.size(); ++i) {
      double sum = 0;
      for (std::size_t k = 0; k < 5; ++k) sum += std::log(std::max(prof[k][static_cast<int>(seq.residues[i + k])], 1e-9));
      CHECK(s[i] == doctest::Approx(sum / 5).epsilon(1e-12));
    }
    // Relabel the 20 types consistently in profile and sequence.
    std::vector<int> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto prof2 = prof;
    for (std::size_t k = 0; k < 5; ++k)
      for (int a = 0; a < 20; ++a) prof2[k][perm[a]] = prof[k][a];
    Sequence seq2 = seq;
    for (auto& r : seq2.residues) r = static_cast<AminoAcid>(perm[static_cast<int>(r)]);
    const auto s2 = alignment_scores(prof2, seq2);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s2[i] == doctest::Approx(s[i]).epsilon(1e-12));
  }
}

TEST_CASE("confidence") {
  CHECK(confidence(std::vector<double>{-2, -2, -2}) == 0.0);
  CHECK(confidence(std::vector<double>{-1}) == 0.0);
  CHECK(confidence(std::vector<double>{0, -1, -1, -1, -1}) == doctest::Approx(0.8 / (0.4 + 1e-6)));
  const std::vector<double> s{-0.3, -2.1, -1.7, -0.9, -3.0, -2.2};
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = 2.5 * s[i] + 7.0;
  CHECK(confidence(t) == doctest::Approx(confidence(s)).epsilon(1e-5));
  CHECK_THROWS(confidence(std::vector<double>{}));
}

TEST_CASE("label_fragment") {
  std::mt19937_64 rng(3);
  const Sequence seq = random_sequence(rng, 60);
  const std::vector<Sequence> seqs{seq};

  SUBCASE("one-hot fragments recover their start") {
    for (std::size_t start = 0; start + 3 <= 60; start += 4) {
      const auto r = label_fragment(one_hot_fragment(seq, start, 3), seqs, {}, {});
      REQUIRE(std::holds_alternative<LabeledFragment>(r));
      const auto& lf = std::get<LabeledFragment>(r);
      CHECK(lf.start_index == start);
      CHECK(lf.aa_assignment == std::vector<AminoAcid>(seq.residues.begin() + start, seq.residues.begin() + start + 3));
      CHECK(lf.confidence >= 3.4);
    }
  }
  SUBCASE("uniform and repeated motifs are rejected") {
    const auto r = label_fragment(uniform_fragment(6), seqs, {}, {});
    REQUIRE(std::holds_alternative<RejectedFragment>(r));
    CHECK(std::get<RejectedFragment>(r).reason == RejectReason::LowConfidence);
    CHECK(std::get<RejectedFragment>(r).confidence == doctest::Approx(0.0));

    Sequence poly;
    poly.residues.assign(30, AminoAcid::A);
    const std::vector<Sequence> polys{poly};
    const auto rp = label_fragment(one_hot_fragment(poly, 0, 5), polys, {}, {});
    REQUIRE(std::holds_alternative<RejectedFragment>(rp));
    CHECK(std::get<RejectedFragment>(rp).confidence == 0.0);
  }
  SUBCASE("claimed windows are rejected as overlaps") {
    const std::vector<SequenceClaim> claims{{0, 10, 15}};
    const auto r = label_fragment(one_hot_fragment(seq, 12, 6), seqs, {}, claims);
    REQUIRE(std::holds_alternative<RejectedFragment>(r));
    CHECK(std::get<RejectedFragment>(r).reason == RejectReason::Overlap);
  }
  SUBCASE("multiple sequences") {
    const Sequence other = random_sequence(rng, 25);
    const std::vector<Sequence> two{seq, other};
    const auto r = label_fragment(one_hot_fragment(other, 7, 8), two, {}, {});
    REQUIRE(std::holds_alternative<LabeledFragment>(r));
    CHECK(std::get<LabeledFragment>(r).sequence_index == 1);
    CHECK(std::get<LabeledFragment>(r).start_index == 7);
    CHECK(std::get<LabeledFragment>(r).all_scores.size() == 53 + 18);
  }
}

TEST_CASE("label_fragments: greedy, non-overlapping, ordered by confidence") {
  std::mt19937_64 rng(4);
  const Sequence seq = random_sequence(rng, 80);
  std::vector<Fragment> frags{one_hot_fragment(seq, 0, 10), one_hot_fragment(seq, 5, 4), one_hot_fragment(seq, 30, 12),
                              uniform_fragment(5), one_hot_fragment(seq, 50, 6)};
  const std::vector<Sequence> seqs{seq};
  const auto r = label_fragments(frags, seqs);
  CHECK(r.accepted.size() + r.rejected.size() == frags.size());
  for (std::size_t i = 0; i + 1 < r.accepted.size(); ++i) CHECK(r.accepted[i].confidence >= r.accepted[i + 1].confidence);
  for (std::size_t i = 0; i < r.accepted.size(); ++i)
    for (std::size_t j = i + 1; j < r.accepted.size(); ++j) {
      const auto& a = r.accepted[i];
      const auto& b = r.accepted[j];
      const bool overlap = a.start_index < b.start_index + b.fragment.size() && b.start_index < a.start_index + a.fragment.size();
      CHECK(!overlap);
    }
  // The short fragment inside the first one loses the overlap.
  bool overlap_rejected = false;
  for (const auto& rej : r.rejected) overlap_rejected |= rej.fragment_id == 1 && rej.reason == RejectReason::Overlap;
  CHECK(overlap_rejected);
  CHECK(r.accepted.size() == 3);
}

TEST_CASE("argmax types") {
  Fragment f = uniform_fragment(2);
  f.residues[0].aa[3] = 0.5;
  f.residues[1].aa[19] = 0.9;
  CHECK(argmax_types(f) == std::vector<AminoAcid>{AminoAcid::E, AminoAcid::Y});
}
