#include "cryofit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include <Eigen/Dense>

#include "cryofit/errors.hpp"

namespace cryofit {

MatchReport ca_precision_recall(std::span<const Vec3> detected, std::span<const Vec3> truth, double cutoff) {
  if (!(cutoff > 0.0)) throw std::invalid_argument("ca_precision_recall: cutoff must be positive");
  if (truth.empty()) throw DataError("ca_precision_recall: empty truth set");

  const double cut2 = cutoff * cutoff;
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < detected.size(); ++i)
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d2 = norm2(detected[i] - truth[j]);
      if (d2 <= cut2) pairs.emplace_back(d2, i, j);
    }
  std::sort(pairs.begin(), pairs.end());

  MatchReport r;
  std::vector<std::uint8_t> used_d(detected.size(), 0), used_t(truth.size(), 0);
  for (const auto& [d2, i, j] : pairs) {
    if (used_d[i] || used_t[j]) continue;
    used_d[i] = used_t[j] = 1;
    r.match_pairs.emplace_back(i, j);
  }
  std::sort(r.match_pairs.begin(), r.match_pairs.end());
  r.true_positives = r.match_pairs.size();
  r.false_positives = detected.size() - r.true_positives;
  r.false_negatives = truth.size() - r.true_positives;
  r.precision = detected.empty() ? 0.0 : static_cast<double>(r.true_positives) / static_cast<double>(detected.size());
  r.recall = static_cast<double>(r.true_positives) / static_cast<double>(truth.size());
  return r;
}

double aa_precision(std::span<const Vec3> positions, std::span<const AminoAcid> assigned, const Chain& truth,
                    double cutoff) {
  if (positions.size() != assigned.size()) throw std::invalid_argument("aa_precision: size mismatch");
  const auto truth_pos = ca_positions(truth);
  std::vector<AminoAcid> truth_aa;
  for (const auto& r : truth.residues)
    if (r.ca()) truth_aa.push_back(r.aa);
  const MatchReport m = ca_precision_recall(positions, truth_pos, cutoff);
  if (m.match_pairs.empty()) throw DataError("aa_precision: no residue matched the truth chain");
  std::size_t correct = 0;
  for (const auto& [i, j] : m.match_pairs)
    if (assigned[i] == truth_aa[j]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(m.match_pairs.size());
}

double rmsd(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("rmsd: need equal, non-empty position sets");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += norm2(a[i] - b[i]);
  return std::sqrt(sum / static_cast<double>(a.size()));
}

Vec3 Superposition::apply(const Vec3& p) const {
  Vec3 out = translation;
  for (int r = 0; r < 3; ++r) out[r] += rotation[r][0] * p.x + rotation[r][1] * p.y + rotation[r][2] * p.z;
  return out;
}

Superposition kabsch(std::span<const Vec3> mobile, std::span<const Vec3> target) {
  if (mobile.size() != target.size() || mobile.empty()) throw std::invalid_argument("kabsch: size mismatch");
  const double n = static_cast<double>(mobile.size());
  Eigen::Vector3d cm = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < mobile.size(); ++i) {
    cm += Eigen::Vector3d(mobile[i].x, mobile[i].y, mobile[i].z);
    ct += Eigen::Vector3d(target[i].x, target[i].y, target[i].z);
  }
  cm /= n;
  ct /= n;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < mobile.size(); ++i) {
    const Eigen::Vector3d a = Eigen::Vector3d(mobile[i].x, mobile[i].y, mobile[i].z) - cm;
    const Eigen::Vector3d b = Eigen::Vector3d(target[i].x, target[i].y, target[i].z) - ct;
    h += a * b.transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d rot = svd.matrixV() * d * svd.matrixU().transpose();
  const Eigen::Vector3d t = ct - rot * cm;

  Superposition s;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s.rotation[r][c] = rot(r, c);
  s.translation = {t(0), t(1), t(2)};
  return s;
}

double tm_d0(std::size_t l_ref) {
  if (l_ref <= 15) return 0.5;
  return std::max(0.5, 1.24 * std::cbrt(static_cast<double>(l_ref) - 15.0) - 1.8);
}

double tm_score_fixed(std::span<const Vec3> model, std::span<const Vec3> reference, double d0, std::size_t l_norm) {
  if (model.size() != reference.size()) throw std::invalid_argument("tm_score_fixed: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double r = distance(model[i], reference[i]) / d0;
    sum += 1.0 / (1.0 + r * r);
  }
  return sum / static_cast<double>(l_norm);
}

double tm_score_positions(std::span<const Vec3> model, std::span<const Vec3> reference, std::size_t l_ref) {
  const std::size_t n = model.size();
  if (n != reference.size()) throw std::invalid_argument("tm_score: size mismatch");
  if (n < 3) throw DataError("tm_score: fewer than 3 common residues");
  const double d0 = tm_d0(l_ref);
  const double d_search = std::clamp(d0, 4.5, 8.0);

  std::vector<Vec3> moved(n);
  auto score_with = [&](const Superposition& s) {
    for (std::size_t i = 0; i < n; ++i) moved[i] = s.apply(model[i]);
    return tm_score_fixed(moved, reference, d0, l_ref);
  };

  double best = 0.0;
  std::vector<std::size_t> lengths;
  for (std::size_t len = n; len >= 4; len /= 2) lengths.push_back(len);
  if (lengths.empty()) lengths.push_back(n);

  for (std::size_t len : lengths) {
    for (std::size_t start = 0; start + len <= n; ++start) {
      std::vector<std::size_t> set(len);
      for (std::size_t k = 0; k < len; ++k) set[k] = start + k;
      for (int iter = 0; iter < 20; ++iter) {
        std::vector<Vec3> a, b;
        for (std::size_t k : set) {
          a.push_back(model[k]);
          b.push_back(reference[k]);
        }
        const Superposition s = kabsch(a, b);
        best = std::max(best, score_with(s));
        // Grow the inclusion set to pairs within the search cutoff, relaxing
        // it until at least three pairs qualify.
        std::vector<std::size_t> next;
        for (double cut = d_search - 1.0; next.size() < 3 && cut < 1e3; cut += 0.5) {
          next.clear();
          for (std::size_t k = 0; k < n; ++k)
            if (distance(moved[k], reference[k]) < cut) next.push_back(k);
        }
        if (next == set) break;
        set = std::move(next);
      }
    }
  }
  return best;
}

namespace {

using ResidueKey = std::pair<std::string, int>;

std::map<ResidueKey, Vec3> ca_map(const Structure& s, bool use_chain) {
  std::map<ResidueKey, Vec3> out;
  for (const auto& c : s.chains)
    for (const auto& r : c.residues)
      if (const Atom* ca = r.ca()) out[{use_chain ? c.id : std::string(), r.seq_num}] = ca->position;
  return out;
}

}  // namespace

double tm_score(const Structure& model, const Structure& reference) {
  const bool use_chain = model.chains.size() > 1 || reference.chains.size() > 1;
  const auto m = ca_map(model, use_chain);
  const auto r = ca_map(reference, use_chain);
  std::vector<Vec3> a, b;
  for (const auto& [key, pos] : r) {
    const auto it = m.find(key);
    if (it == m.end()) continue;
    a.push_back(it->second);
    b.push_back(pos);
  }
  if (a.size() < 3) throw DataError("tm_score: fewer than 3 common residues");
  return tm_score_positions(a, b, r.size());
}

}  // namespace cryofit
