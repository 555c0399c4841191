#include "cryofit/tracing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "cryofit/errors.hpp"
#include "cryofit/parallel.hpp"

namespace cryofit {

std::vector<CaCandidate> extract_candidates(const FeatureGrids& grids, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("extract_candidates: threshold must lie in (0,1)");
  std::vector<CaCandidate> out;
  const auto probs = grids.ca_prob.values();
  for (std::size_t c = 0; c < grids.cell_count(); ++c) {
    if (probs[c] < threshold) continue;
    CaCandidate cand;
    cand.cell = grids.ca_prob.unlinear(c);
    cand.position = grids.cell_corner(c) + grids.offset(c);
    cand.ppv = grids.ppv_at(c);
    cand.aa = grids.aa_at(c);
    cand.score = probs[c];
    out.push_back(cand);
  }
  return out;
}

double link_residual_sq(const CaCandidate& from, const CaCandidate& to) {
  return norm2(from.position + from.ppv - to.position);
}

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

struct CellKey {
  long long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    return static_cast<std::size_t>(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
  }
};

CellKey key_of(const Vec3& p) {
  return {static_cast<long long>(std::floor(p.x / 2.0)), static_cast<long long>(std::floor(p.y / 2.0)),
          static_cast<long long>(std::floor(p.z / 2.0))};
}

// Strict weak order on (residual, cell) used for every tie break.
bool better(double r_a, const Index3& cell_a, double r_b, const Index3& cell_b) {
  if (r_a != r_b) return r_a < r_b;
  return cell_a < cell_b;
}

}  // namespace

std::vector<Fragment> trace_fragments(const std::vector<CaCandidate>& input, const TraceOptions& options) {
  if (!(options.epsilon_sq > 0.0)) throw std::invalid_argument("trace_fragments: epsilon_sq must be positive");

  std::vector<CaCandidate> cands = input;
  std::sort(cands.begin(), cands.end(), [](const CaCandidate& a, const CaCandidate& b) { return a.cell < b.cell; });
  const std::size_t n = cands.size();

  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> hash;
  for (std::size_t i = 0; i < n; ++i) hash[key_of(cands[i].position)].push_back(i);

  const int reach = std::max(options.search_cells, static_cast<int>(std::ceil(std::sqrt(options.epsilon_sq) / 2.0)) + 1);
  const double min_d2 = options.min_link_distance * options.min_link_distance;
  const double max_d2 = options.max_link_distance * options.max_link_distance;

  // Best successor of every candidate.
  std::vector<std::size_t> succ(n, npos);
  std::vector<double> succ_residual(n, 0.0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      const Vec3 target = cands[q].position + cands[q].ppv;
      const CellKey k = key_of(target);
      for (long long dz = -reach; dz <= reach; ++dz)
        for (long long dy = -reach; dy <= reach; ++dy)
          for (long long dx = -reach; dx <= reach; ++dx) {
            const auto it = hash.find({k.x + dx, k.y + dy, k.z + dz});
            if (it == hash.end()) continue;
            for (std::size_t p : it->second) {
              if (p == q) continue;
              const double r = norm2(target - cands[p].position);
              if (r > options.epsilon_sq) continue;
              const double d2 = norm2(cands[p].position - cands[q].position);
              if (d2 <= min_d2 || d2 >= max_d2) continue;
              if (succ[q] == npos || better(r, cands[p].cell, succ_residual[q], cands[succ[q]].cell)) {
                succ[q] = p;
                succ_residual[q] = r;
              }
            }
          }
    }
  });

  // Each candidate keeps only its best predecessor.
  std::vector<std::size_t> pred(n, npos);
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t p = succ[q];
    if (p == npos) continue;
    if (pred[p] == npos || better(succ_residual[q], cands[q].cell, succ_residual[pred[p]], cands[pred[p]].cell))
      pred[p] = q;
  }
  for (std::size_t q = 0; q < n; ++q)
    if (succ[q] != npos && pred[succ[q]] != q) succ[q] = npos;

  std::vector<Fragment> fragments;
  std::vector<std::uint8_t> used(n, 0);
  auto emit_from = [&](std::size_t head) {
    Fragment f;
    for (std::size_t x = head; x != npos && !used[x]; x = succ[x]) {
      used[x] = 1;
      f.residues.push_back(cands[x]);
    }
    fragments.push_back(std::move(f));
  };
  for (std::size_t i = 0; i < n; ++i)
    if (pred[i] == npos || succ[pred[i]] != i) emit_from(i);

  // Whatever is left lies on cycles: cut each at its worst link.
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i]) continue;
    std::size_t worst = i;
    for (std::size_t x = succ[i]; x != i; x = succ[x])
      if (better(succ_residual[worst], cands[worst].cell, succ_residual[x], cands[x].cell)) worst = x;
    const std::size_t head = succ[worst];
    succ[worst] = npos;
    emit_from(head);
  }

  std::sort(fragments.begin(), fragments.end(),
            [](const Fragment& a, const Fragment& b) { return a.residues.front().cell < b.residues.front().cell; });
  return fragments;
}

std::vector<Fragment> prune_fragments(std::vector<Fragment> fragments, std::size_t min_len) {
  if (min_len < 1) throw std::invalid_argument("prune_fragments: min_len must be >= 1");
  std::erase_if(fragments, [min_len](const Fragment& f) { return f.size() < min_len; });
  return fragments;
}

std::string fragment_chain_id(std::size_t index) {
  if (index < 26) return std::string(1, static_cast<char>('A' + index));
  index -= 26;
  if (index >= 26 * 26) throw std::out_of_range("fragment_chain_id: more than 702 fragments");
  return {static_cast<char>('A' + index / 26), static_cast<char>('A' + index % 26)};
}

Structure fragments_to_structure(const std::vector<Fragment>& fragments) {
  Structure s;
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    Chain chain{fragment_chain_id(f), {}};
    int num = 1;
    for (const auto& r : fragments[f].residues) {
      const auto best = std::max_element(r.aa.begin(), r.aa.end()) - r.aa.begin();
      chain.residues.push_back({num++, static_cast<AminoAcid>(best), {{"CA", "C", r.position}}});
    }
    s.chains.push_back(std::move(chain));
  }
  return s;
}

std::string fragments_to_json(const std::vector<Fragment>& fragments) {
  nlohmann::ordered_json root;
  root["format"] = "cryofit-fragments";
  root["version"] = 1;
  root["aa_order"] = std::string(kAminoAcidLetters);
  root["fragments"] = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    nlohmann::ordered_json jf;
    jf["id"] = f;
    jf["length"] = fragments[f].size();
    jf["residues"] = nlohmann::ordered_json::array();
    for (const auto& r : fragments[f].residues) {
      nlohmann::ordered_json jr;
      jr["cell"] = r.cell;
      jr["position"] = {r.position.x, r.position.y, r.position.z};
      jr["ppv"] = {r.ppv.x, r.ppv.y, r.ppv.z};
      jr["score"] = r.score;
      jr["aa_dist"] = r.aa;
      jf["residues"].push_back(std::move(jr));
    }
    root["fragments"].push_back(std::move(jf));
  }
  return root.dump(2) + "\n";
}

std::vector<Fragment> fragments_from_json(const std::string& text) {
  try {
    const auto root = nlohmann::json::parse(text);
    if (root.contains("aa_order") && root["aa_order"].get<std::string>() != kAminoAcidLetters)
      throw DataError("fragments: unsupported AA order");
    std::vector<Fragment> out;
    for (const auto& jf : root.at("fragments")) {
      Fragment f;
      for (const auto& jr : jf.at("residues")) {
        CaCandidate c;
        c.cell = jr.at("cell").get<Index3>();
        const auto p = jr.at("position").get<std::array<double, 3>>();
        const auto v = jr.at("ppv").get<std::array<double, 3>>();
        c.position = {p[0], p[1], p[2]};
        c.ppv = {v[0], v[1], v[2]};
        c.score = jr.at("score").get<double>();
        c.aa = jr.at("aa_dist").get<AaDistribution>();
        f.residues.push_back(c);
      }
      if (f.residues.empty()) throw DataError("fragments: empty fragment");
      out.push_back(std::move(f));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("fragments: " + std::string(e.what()));
  }
}

}  // namespace cryofit
