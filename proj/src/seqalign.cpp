#include "cryofit/seqalign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cryofit/features.hpp"

namespace cryofit {

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::LowConfidence: return "low_confidence";
    case RejectReason::Overlap: return "overlap";
    case RejectReason::TooLong: return "longer_than_sequence";
  }
  return "unknown";
}

std::vector<double> alignment_scores(std::span<const AaDistribution> profile, const Sequence& sequence) {
  const std::size_t n = profile.size();
  const std::size_t l = sequence.length();
  if (n == 0) throw std::invalid_argument("alignment_scores: empty fragment");
  if (n > l) throw std::invalid_argument("alignment_scores: fragment longer than sequence");

  // log P for every (fragment position, type), computed once.
  std::vector<AaDistribution> log_p(n);
  for (std::size_t k = 0; k < n; ++k)
    for (int t = 0; t < kNumAminoAcids; ++t) log_p[k][t] = std::log(std::max(profile[k][t], kProbFloor));

  std::vector<double> s(l - n + 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += log_p[k][static_cast<int>(sequence.residues[i + k])];
    s[i] = sum / static_cast<double>(n);
  }
  return s;
}

namespace {

std::vector<AaDistribution> profile_of(const Fragment& fragment) {
  std::vector<AaDistribution> p;
  p.reserve(fragment.size());
  for (const auto& r : fragment.residues) p.push_back(r.aa);
  return p;
}

struct BestWindow {
  bool any = false;
  std::size_t sequence_index = 0;
  std::size_t start = 0;
  double best = 0.0;
  bool ambiguous = false;
  std::vector<double> all_scores;
  double confidence = 0.0;
};

BestWindow best_window(const Fragment& fragment, std::span<const Sequence> sequences) {
  BestWindow w;
  const auto profile = profile_of(fragment);
  for (std::size_t si = 0; si < sequences.size(); ++si) {
    if (profile.size() > sequences[si].length()) continue;
    const auto s = alignment_scores(profile, sequences[si]);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!w.any || s[i] > w.best) {
        w.any = true;
        w.best = s[i];
        w.sequence_index = si;
        w.start = i;
        w.ambiguous = false;
      } else if (s[i] == w.best) {
        w.ambiguous = true;
      }
    }
    w.all_scores.insert(w.all_scores.end(), s.begin(), s.end());
  }
  if (w.any) w.confidence = confidence(w.all_scores);
  return w;
}

bool overlaps(const SequenceClaim& c, std::size_t seq, std::size_t begin, std::size_t end) {
  return c.sequence_index == seq && begin < c.end && c.begin < end;
}

}  // namespace

std::vector<double> alignment_scores(const Fragment& fragment, const Sequence& sequence) {
  return alignment_scores(profile_of(fragment), sequence);
}

double confidence(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("confidence: empty score vector");
  const double n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double var = 0.0;
  for (double v : scores) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  const double max = *std::max_element(scores.begin(), scores.end());
  return (max - mean) / (sd + 1e-6);
}

LabelResult label_fragment(const Fragment& fragment, std::span<const Sequence> sequences, const AlignOptions& options,
                           std::span<const SequenceClaim> claimed, std::size_t fragment_id) {
  if (fragment.size() == 0) throw std::invalid_argument("label_fragment: empty fragment");
  const BestWindow w = best_window(fragment, sequences);
  if (!w.any) return RejectedFragment{fragment_id, RejectReason::TooLong, 0.0, 0, 0};

  RejectedFragment rejected{fragment_id, RejectReason::LowConfidence, w.confidence, w.start, w.sequence_index};
  if (w.confidence < options.confidence_threshold) return rejected;
  const std::size_t end = w.start + fragment.size();
  for (const auto& c : claimed) {
    if (overlaps(c, w.sequence_index, w.start, end)) {
      rejected.reason = RejectReason::Overlap;
      return rejected;
    }
  }

  LabeledFragment lf;
  lf.fragment = fragment;
  lf.fragment_id = fragment_id;
  lf.sequence_index = w.sequence_index;
  lf.start_index = w.start;
  lf.confidence = w.confidence;
  lf.all_scores = w.all_scores;
  lf.ambiguous = w.ambiguous;
  const auto& seq = sequences[w.sequence_index].residues;
  lf.aa_assignment.assign(seq.begin() + static_cast<std::ptrdiff_t>(w.start),
                          seq.begin() + static_cast<std::ptrdiff_t>(end));
  return lf;
}

AlignmentResult label_fragments(const std::vector<Fragment>& fragments, std::span<const Sequence> sequences,
                                const AlignOptions& options) {
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(fragments.size());
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    const BestWindow w = best_window(fragments[f], sequences);
    order.emplace_back(w.any ? w.confidence : -1e300, f);
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  AlignmentResult result;
  std::vector<SequenceClaim> claims;
  for (const auto& [conf, f] : order) {
    auto r = label_fragment(fragments[f], sequences, options, claims, f);
    if (auto* lf = std::get_if<LabeledFragment>(&r)) {
      claims.push_back({lf->sequence_index, lf->start_index, lf->start_index + lf->fragment.size()});
      result.accepted.push_back(std::move(*lf));
    } else {
      result.rejected.push_back(std::get<RejectedFragment>(r));
    }
  }
  return result;
}

std::vector<AminoAcid> argmax_types(const Fragment& fragment) {
  std::vector<AminoAcid> out;
  out.reserve(fragment.size());
  for (const auto& r : fragment.residues)
    out.push_back(static_cast<AminoAcid>(std::max_element(r.aa.begin(), r.aa.end()) - r.aa.begin()));
  return out;
}

}  // namespace cryofit
