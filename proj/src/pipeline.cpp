#include "cryofit/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "cryofit/errors.hpp"
#include "cryofit/metrics.hpp"
#include "cryofit/synthetic.hpp"

namespace cryofit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

void log_line(const std::string& tag, const std::string& msg) { std::cerr << "[" << tag << "] " << msg << "\n"; }

std::string to_string(MapSource m) {
  switch (m) {
    case MapSource::None: return "none";
    case MapSource::Backbone: return "backbone";
    case MapSource::Experimental: return "experimental";
  }
  return "none";
}

std::string to_string(MapPotentialKind k) { return k == MapPotentialKind::Mdff ? "mdff" : "cdmd"; }

std::string to_string(RestraintSet r) {
  switch (r) {
    case RestraintSet::None: return "none";
    case RestraintSet::TmdAtoms: return "tmd_atoms";
    case RestraintSet::All: return "all";
  }
  return "none";
}

MapSource map_source_from(const std::string& s) {
  if (s == "none") return MapSource::None;
  if (s == "backbone") return MapSource::Backbone;
  if (s == "experimental") return MapSource::Experimental;
  throw DataError("config: unknown map source '" + s + "'");
}

MapPotentialKind potential_from(const std::string& s) {
  if (s == "mdff") return MapPotentialKind::Mdff;
  if (s == "cdmd") return MapPotentialKind::Cdmd;
  throw DataError("config: unknown map potential '" + s + "'");
}

RestraintSet restraint_from(const std::string& s) {
  if (s == "none") return RestraintSet::None;
  if (s == "tmd_atoms") return RestraintSet::TmdAtoms;
  if (s == "all") return RestraintSet::All;
  throw DataError("config: unknown restraint set '" + s + "'");
}

// Reads j[key] into out when present.
template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end())
      throw DataError("config: unknown key '" + k + "' in " + where);
  }
}

ojson stage_to_json(const StageSpec& s) {
  ojson j;
  j["name"] = s.name;
  j["tmd"] = s.tmd;
  j["tmd_steps"] = s.tmd_steps;
  j["map"] = to_string(s.map);
  j["potential"] = to_string(s.potential);
  j["k_map"] = s.k_map;
  j["resolution"] = s.resolution;
  j["restrain"] = to_string(s.restrain);
  j["k_pos"] = s.k_pos;
  j["max_steps"] = s.max_steps;
  j["force_tolerance"] = s.force_tolerance;
  j["ccc_target"] = s.ccc_target;
  return j;
}

StageSpec stage_from_json(const json& j) {
  reject_unknown(j, {"name", "tmd", "tmd_steps", "map", "potential", "k_map", "resolution", "restrain", "k_pos",
                     "max_steps", "force_tolerance", "ccc_target"},
                 "stage");
  StageSpec s;
  take(j, "name", s.name);
  take(j, "tmd", s.tmd);
  take(j, "tmd_steps", s.tmd_steps);
  if (j.contains("map")) s.map = map_source_from(j.at("map").get<std::string>());
  if (j.contains("potential")) s.potential = potential_from(j.at("potential").get<std::string>());
  take(j, "k_map", s.k_map);
  take(j, "resolution", s.resolution);
  if (j.contains("restrain")) s.restrain = restraint_from(j.at("restrain").get<std::string>());
  take(j, "k_pos", s.k_pos);
  take(j, "max_steps", s.max_steps);
  take(j, "force_tolerance", s.force_tolerance);
  take(j, "ccc_target", s.ccc_target);
  return s;
}

std::vector<Vec3> fragment_positions(const std::vector<Fragment>& fragments) {
  std::vector<Vec3> out;
  for (const auto& f : fragments)
    for (const auto& r : f.residues) out.push_back(r.position);
  return out;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw DataError(what + " not found: " + p.string());
}

Structure load_chain(const PipelineConfig& config, const std::string& path, const std::string& what) {
  if (path.empty()) throw DataError("config: no " + what + " path given");
  const fs::path p = config.resolve(path);
  require_file(p, what);
  std::vector<std::string> warnings;
  const Structure s = read_structure_file(p.string(), &warnings);
  for (const auto& w : warnings) log_line("structio", w);
  return select_chain(s, config.chain);
}

Sequence load_sequence(const PipelineConfig& config) {
  if (config.sequence.empty()) throw DataError("config: no sequence path given");
  const fs::path p = config.resolve(config.sequence);
  require_file(p, "sequence");
  return read_fasta_file(p.string());
}

fs::path out_path(const PipelineConfig& config, const std::string& name) {
  const fs::path dir = config.resolve(config.output_dir);
  fs::create_directories(dir);
  return dir / name;
}

FeatureGrids noisy_grids(const FeatureGrids& labels, const NoiseSpec& noise) {
  return inject_noise(labels, noise);
}

}  // namespace

fs::path PipelineConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void PipelineConfig::validate() const {
  if (threads < 1) throw DataError("config: threads must be >= 1");
  if (!(thresholds.detection > 0.0 && thresholds.detection < 1.0)) throw DataError("config: detection threshold must lie in (0,1)");
  if (!(thresholds.epsilon_sq > 0.0)) throw DataError("config: epsilon_sq must be positive");
  if (thresholds.min_len < 1) throw DataError("config: min_len must be >= 1");
  if (!(thresholds.match_cutoff > 0.0)) throw DataError("config: match_cutoff must be positive");
  if (grid_padding < 0.0) throw DataError("config: grid_padding must be >= 0");
  if (synth.length < 3) throw DataError("config: synth.length must be >= 3");
  if (ablation.seeds < 1) throw DataError("config: ablation.seeds must be >= 1");
  if (fitting.friction <= 0.0 || fitting.friction > 1.0) throw DataError("config: friction must lie in (0,1]");
  if (fitting.step_size <= 0.0 || fitting.max_displacement <= 0.0) throw DataError("config: step sizes must be positive");
  if (fitting.log_interval < 1) throw DataError("config: log_interval must be >= 1");
  try {
    noise.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

ojson config_to_json(const PipelineConfig& c) {
  ojson j;
  j["structure"] = c.structure;
  j["sequence"] = c.sequence;
  j["initial"] = c.initial;
  j["map"] = c.map;
  j["feature_dir"] = c.feature_dir;
  j["output_dir"] = c.output_dir;
  j["chain"] = c.chain;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["first_author_index"] = c.first_author_index;
  j["grid_padding"] = c.grid_padding;
  j["prune"] = c.prune;
  j["thresholds"] = {{"detection", c.thresholds.detection},
                     {"epsilon_sq", c.thresholds.epsilon_sq},
                     {"min_len", c.thresholds.min_len},
                     {"confidence", c.thresholds.confidence},
                     {"match_cutoff", c.thresholds.match_cutoff}};
  j["noise"] = {{"ca_dropout", c.noise.ca_dropout},
                {"dropout_correlation", c.noise.dropout_correlation},
                {"fp_rate", c.noise.fp_rate},
                {"offset_jitter_sigma", c.noise.offset_jitter_sigma},
                {"ppv_jitter_sigma", c.noise.ppv_jitter_sigma},
                {"aa_dirichlet_alpha", c.noise.aa_dirichlet_alpha},
                {"bb_noise_sigma", c.noise.bb_noise_sigma},
                {"score_sigma", c.noise.score_sigma}};
  ojson f;
  const auto& k = c.fitting.constants;
  f["constants"] = {{"bond_length", k.bond_length}, {"k_bond", k.k_bond}, {"k_angle", k.k_angle},
                    {"k_rep", k.k_rep}, {"rep_radius", k.rep_radius}};
  f["tmd_h"] = c.fitting.tmd_h;
  f["friction"] = c.fitting.friction;
  f["step_size"] = c.fitting.step_size;
  f["max_displacement"] = c.fitting.max_displacement;
  f["log_interval"] = c.fitting.log_interval;
  f["divergence_limit"] = c.fitting.divergence_limit;
  f["stages"] = ojson::array();
  for (const auto& s : c.fitting.stages) f["stages"].push_back(stage_to_json(s));
  j["fitting"] = f;
  j["synth"] = {{"length", c.synth.length}, {"tag_length", c.synth.tag_length},
                {"perturbation_rmsd", c.synth.perturbation_rmsd}};
  j["ablation"] = {{"min_lens", c.ablation.min_lens}, {"seeds", c.ablation.seeds},
                   {"aa_min_fragment", c.ablation.aa_min_fragment}};
  return j;
}

PipelineConfig config_from_json(const json& j) {
  try {
    reject_unknown(j, {"structure", "sequence", "initial", "map", "feature_dir", "output_dir", "chain", "seed",
                       "threads", "first_author_index", "grid_padding", "prune", "thresholds", "noise", "fitting",
                       "synth", "ablation"},
                   "config");
    PipelineConfig c;
    take(j, "structure", c.structure);
    take(j, "sequence", c.sequence);
    take(j, "initial", c.initial);
    take(j, "map", c.map);
    take(j, "feature_dir", c.feature_dir);
    take(j, "output_dir", c.output_dir);
    take(j, "chain", c.chain);
    take(j, "seed", c.seed);
    take(j, "threads", c.threads);
    take(j, "first_author_index", c.first_author_index);
    take(j, "grid_padding", c.grid_padding);
    take(j, "prune", c.prune);
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      reject_unknown(t, {"detection", "epsilon_sq", "min_len", "confidence", "match_cutoff"}, "thresholds");
      take(t, "detection", c.thresholds.detection);
      take(t, "epsilon_sq", c.thresholds.epsilon_sq);
      take(t, "min_len", c.thresholds.min_len);
      take(t, "confidence", c.thresholds.confidence);
      take(t, "match_cutoff", c.thresholds.match_cutoff);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      reject_unknown(n, {"ca_dropout", "dropout_correlation", "fp_rate", "offset_jitter_sigma", "ppv_jitter_sigma",
                         "aa_dirichlet_alpha", "bb_noise_sigma", "score_sigma"},
                     "noise");
      take(n, "ca_dropout", c.noise.ca_dropout);
      take(n, "dropout_correlation", c.noise.dropout_correlation);
      take(n, "fp_rate", c.noise.fp_rate);
      take(n, "offset_jitter_sigma", c.noise.offset_jitter_sigma);
      take(n, "ppv_jitter_sigma", c.noise.ppv_jitter_sigma);
      take(n, "aa_dirichlet_alpha", c.noise.aa_dirichlet_alpha);
      take(n, "bb_noise_sigma", c.noise.bb_noise_sigma);
      take(n, "score_sigma", c.noise.score_sigma);
    }
    if (j.contains("fitting")) {
      const auto& f = j.at("fitting");
      reject_unknown(f, {"constants", "tmd_h", "friction", "step_size", "max_displacement", "log_interval",
                         "divergence_limit", "stages"},
                     "fitting");
      if (f.contains("constants")) {
        const auto& k = f.at("constants");
        reject_unknown(k, {"bond_length", "k_bond", "k_angle", "k_rep", "rep_radius"}, "fitting.constants");
        take(k, "bond_length", c.fitting.constants.bond_length);
        take(k, "k_bond", c.fitting.constants.k_bond);
        take(k, "k_angle", c.fitting.constants.k_angle);
        take(k, "k_rep", c.fitting.constants.k_rep);
        take(k, "rep_radius", c.fitting.constants.rep_radius);
      }
      take(f, "tmd_h", c.fitting.tmd_h);
      take(f, "friction", c.fitting.friction);
      take(f, "step_size", c.fitting.step_size);
      take(f, "max_displacement", c.fitting.max_displacement);
      take(f, "log_interval", c.fitting.log_interval);
      take(f, "divergence_limit", c.fitting.divergence_limit);
      if (f.contains("stages")) {
        c.fitting.stages.clear();
        for (const auto& s : f.at("stages")) c.fitting.stages.push_back(stage_from_json(s));
      }
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      reject_unknown(s, {"length", "tag_length", "perturbation_rmsd"}, "synth");
      take(s, "length", c.synth.length);
      take(s, "tag_length", c.synth.tag_length);
      take(s, "perturbation_rmsd", c.synth.perturbation_rmsd);
    }
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      reject_unknown(a, {"min_lens", "seeds", "aa_min_fragment"}, "ablation");
      take(a, "min_lens", c.ablation.min_lens);
      take(a, "seeds", c.ablation.seeds);
      take(a, "aa_min_fragment", c.ablation.aa_min_fragment);
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  require_file(path, "config");
  json j;
  try {
    j = json::parse(read_text_file(path.string()));
  } catch (const json::exception& e) {
    throw DataError("config: " + std::string(e.what()));
  }
  PipelineConfig c = config_from_json(j);
  c.base_dir = path.parent_path();
  return c;
}

Structure select_chain(const Structure& structure, const std::string& id) {
  if (id.empty()) {
    if (structure.chains.size() != 1)
      throw DataError("structure has " + std::to_string(structure.chains.size()) + " chains; choose one with --chain");
    return structure;
  }
  const Chain* c = structure.find_chain(id);
  if (!c) throw DataError("chain '" + id + "' not found");
  return Structure{{*c}};
}

void cmd_synth(const PipelineConfig& config) {
  if (config.structure.empty() || config.sequence.empty() || config.initial.empty())
    throw DataError("synth: structure, sequence and initial paths are required");
  const std::string id = config.chain.empty() ? "A" : config.chain;
  const SyntheticProtein p = make_synthetic_protein(config.synth.length, config.seed, config.synth.tag_length, id);
  if (p.first_author_index != config.first_author_index)
    throw DataError("synth: first_author_index must be " + std::to_string(p.first_author_index));
  const Structure initial = perturb_structure(p.structure, config.synth.perturbation_rmsd, config.seed + 1);
  for (const auto& path : {config.structure, config.sequence, config.initial})
    if (config.resolve(path).has_parent_path()) fs::create_directories(config.resolve(path).parent_path());
  write_text_file(config.resolve(config.structure).string(), write_structure(p.structure));
  write_text_file(config.resolve(config.sequence).string(), write_fasta(p.sequence, "synthetic_" + id));
  write_text_file(config.resolve(config.initial).string(), write_structure(initial));
  log_line("synth", std::to_string(config.synth.length) + " modeled residues, sequence length " +
                        std::to_string(p.sequence.length()));
}

void cmd_oracle(const PipelineConfig& config) {
  const Structure truth = load_chain(config, config.structure, "structure");
  const FeatureGrids labels = generate_labels(truth, grid_spec_for(truth, config.grid_padding));
  NoiseSpec noise = config.noise;
  noise.seed = config.seed;
  NoiseLog nlog;
  const FeatureGrids pred = inject_noise(labels, noise, &nlog);
  write_feature_dir(config.resolve(config.feature_dir), pred);
  log_line("oracle", std::to_string(labels.cell_count()) + " coarse cells, " + std::to_string(nlog.dropped_cells.size()) +
                         " dropped, " + std::to_string(nlog.false_positive_cells.size()) + " false positives");
}

TraceSummary cmd_trace(const PipelineConfig& config) {
  const fs::path dir = config.resolve(config.feature_dir);
  require_file(dir / "manifest.json", "feature manifest");
  const FeatureGrids grids = read_feature_dir(dir);
  const auto cands = extract_candidates(grids, config.thresholds.detection);
  TraceOptions opts;
  opts.epsilon_sq = config.thresholds.epsilon_sq;
  auto frags = trace_fragments(cands, opts);
  TraceSummary s{cands.size(), frags.size(), 0};
  if (config.prune) frags = prune_fragments(std::move(frags), config.thresholds.min_len);
  s.fragments = frags.size();
  log_line("trace", std::to_string(s.candidates) + " candidates, " + std::to_string(s.fragments_before_pruning) +
                        " fragments, " + std::to_string(s.fragments) + " kept");
  if (frags.empty()) throw DataError("trace: no fragments found");
  write_text_file(out_path(config, "fragments.json").string(), fragments_to_json(frags));
  write_text_file(out_path(config, "fragments.pdb").string(), write_structure(fragments_to_structure(frags)));
  return s;
}

AlignSummary cmd_align(const PipelineConfig& config) {
  const fs::path fpath = out_path(config, "fragments.json");
  require_file(fpath, "fragments");
  const auto fragments = fragments_from_json(read_text_file(fpath.string()));
  const Sequence seq = load_sequence(config);
  const std::vector<Sequence> seqs{seq};
  AlignOptions opts;
  opts.confidence_threshold = config.thresholds.confidence;
  const AlignmentResult r = label_fragments(fragments, seqs, opts);

  struct Entry {
    double confidence;
    std::size_t id;
    ojson j;
  };
  std::vector<Entry> entries;
  Structure labeled;
  for (std::size_t a = 0; a < r.accepted.size(); ++a) {
    const auto& lf = r.accepted[a];
    ojson j;
    j["fragment_id"] = lf.fragment_id;
    j["status"] = "accepted";
    j["confidence"] = lf.confidence;
    j["length"] = lf.fragment.size();
    j["sequence_index"] = lf.sequence_index;
    j["start_index"] = lf.start_index;
    j["first_residue"] = config.first_author_index + static_cast<int>(lf.start_index);
    j["ambiguous"] = lf.ambiguous;
    std::string assigned;
    for (AminoAcid aa : lf.aa_assignment) assigned += one_letter(aa);
    j["assignment"] = assigned;
    ojson pos = ojson::array();
    for (const auto& res : lf.fragment.residues) pos.push_back({res.position.x, res.position.y, res.position.z});
    j["positions"] = pos;
    entries.push_back({lf.confidence, lf.fragment_id, j});

    Chain c{fragment_chain_id(a), {}};
    for (std::size_t k = 0; k < lf.fragment.size(); ++k)
      c.residues.push_back({config.first_author_index + static_cast<int>(lf.start_index + k), lf.aa_assignment[k],
                            {{"CA", "C", lf.fragment.residues[k].position}}});
    labeled.chains.push_back(std::move(c));
  }
  for (const auto& rej : r.rejected) {
    ojson j;
    j["fragment_id"] = rej.fragment_id;
    j["status"] = "rejected";
    j["reason"] = std::string(to_string(rej.reason));
    j["confidence"] = rej.confidence;
    j["length"] = fragments[rej.fragment_id].size();
    j["sequence_index"] = rej.sequence_index;
    j["best_start"] = rej.best_start;
    entries.push_back({rej.confidence, rej.fragment_id, j});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.id < b.id;
  });

  ojson root;
  root["format"] = "cryofit-alignment";
  root["version"] = 1;
  root["sequence_length"] = seq.length();
  root["first_author_index"] = config.first_author_index;
  root["confidence_threshold"] = config.thresholds.confidence;
  root["accepted"] = r.accepted.size();
  root["rejected"] = r.rejected.size();
  root["fragments"] = ojson::array();
  for (auto& e : entries) root["fragments"].push_back(std::move(e.j));
  write_text_file(out_path(config, "alignment.json").string(), root.dump(2) + "\n");
  if (!labeled.chains.empty()) write_text_file(out_path(config, "labeled.pdb").string(), write_structure(labeled));
  log_line("align", std::to_string(r.accepted.size()) + " accepted, " + std::to_string(r.rejected.size()) + " rejected");
  return {r.accepted.size(), r.rejected.size()};
}

std::vector<LabeledFragment> read_alignment(const fs::path& path) {
  require_file(path, "alignment");
  try {
    const auto root = json::parse(read_text_file(path.string()));
    std::vector<LabeledFragment> out;
    for (const auto& j : root.at("fragments")) {
      if (j.at("status").get<std::string>() != "accepted") continue;
      LabeledFragment lf;
      lf.fragment_id = j.at("fragment_id").get<std::size_t>();
      lf.sequence_index = j.at("sequence_index").get<std::size_t>();
      lf.start_index = j.at("start_index").get<std::size_t>();
      lf.confidence = j.at("confidence").get<double>();
      lf.ambiguous = j.at("ambiguous").get<bool>();
      for (char ch : j.at("assignment").get<std::string>()) {
        const auto aa = from_one_letter(ch);
        if (!aa) throw DataError("alignment: bad residue letter");
        lf.aa_assignment.push_back(*aa);
      }
      for (const auto& p : j.at("positions")) {
        CaCandidate c;
        c.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
        lf.fragment.residues.push_back(c);
      }
      if (lf.fragment.size() != lf.aa_assignment.size()) throw DataError("alignment: length mismatch");
      out.push_back(std::move(lf));
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError("alignment: " + std::string(e.what()));
  }
}

FitResult cmd_fit(const PipelineConfig& config) {
  FitProblem problem;
  problem.initial = load_chain(config, config.initial, "initial structure");
  const auto accepted = read_alignment(out_path(config, "alignment.json"));
  const std::vector<int> first{config.first_author_index};
  problem.targets = correspondences_from_alignment(problem.initial, accepted, first);
  if (problem.targets.empty())
    throw DataError("fit: no fragment correspondences (no accepted fragment maps onto the initial model)");
  const fs::path bb = config.resolve(config.feature_dir) / "bb_prob.mrc";
  if (fs::exists(bb)) problem.backbone_map = read_mrc_file(bb);
  if (!config.map.empty()) {
    const fs::path m = config.resolve(config.map);
    require_file(m, "map");
    problem.experimental_map = read_mrc_file(m);
  }
  log_line("fit", std::to_string(problem.targets.size()) + " restrained residues");
  FitResult r = run_fitting(problem, config.fitting);

  write_text_file(out_path(config, "fitted.pdb").string(), write_structure(r.final_structure));
  std::ostringstream traj;
  for (const auto& rec : r.log) {
    ojson j;
    j["stage"] = rec.stage;
    j["step"] = rec.step;
    j["bonded"] = rec.bonded;
    j["tmd"] = rec.tmd;
    j["map"] = rec.map;
    j["restraint"] = rec.restraint;
    j["total"] = rec.total;
    j["rmsd_to_target"] = rec.rmsd_to_target;
    j["ccc"] = rec.ccc ? ojson(*rec.ccc) : ojson(nullptr);
    j["max_force"] = rec.max_force;
    j["max_restrained_displacement"] = rec.max_restrained_displacement;
    traj << j.dump() << "\n";
  }
  write_text_file(out_path(config, "trajectory.jsonl").string(), traj.str());
  ojson summary = ojson::array();
  for (const auto& s : r.stages) {
    summary.push_back({{"name", s.name}, {"steps", s.steps}, {"termination", s.termination}, {"final_energy", s.final_energy}});
    log_line("fit", s.name + ": " + s.termination + " after " + std::to_string(s.steps) + " steps");
  }
  write_text_file(out_path(config, "fit_summary.json").string(), summary.dump(2) + "\n");
  return r;
}

ojson cmd_eval(const PipelineConfig& config) {
  const Structure truth = load_chain(config, config.structure, "structure");
  const auto truth_ca = ca_positions(truth.chains.front());
  const double cut = config.thresholds.match_cutoff;
  ojson report;
  report["reference_residues"] = truth_ca.size();

  const fs::path frag_path = out_path(config, "fragments.json");
  if (fs::exists(frag_path)) {
    const auto frags = fragments_from_json(read_text_file(frag_path.string()));
    const MatchReport m = ca_precision_recall(fragment_positions(frags), truth_ca, cut);
    report["ca_detection"] = {{"fragments", frags.size()}, {"true_positives", m.true_positives},
                              {"false_positives", m.false_positives}, {"false_negatives", m.false_negatives},
                              {"precision", m.precision}, {"recall", m.recall}};
  }

  const fs::path align_path = out_path(config, "alignment.json");
  std::vector<int> covered;
  if (fs::exists(align_path)) {
    const auto accepted = read_alignment(align_path);
    std::vector<Vec3> pos;
    std::vector<AminoAcid> types;
    std::vector<int> numbers;
    for (const auto& lf : accepted)
      for (std::size_t k = 0; k < lf.fragment.size(); ++k) {
        pos.push_back(lf.fragment.residues[k].position);
        types.push_back(lf.aa_assignment[k]);
        numbers.push_back(config.first_author_index + static_cast<int>(lf.start_index + k));
      }
    ojson a;
    a["accepted_fragments"] = accepted.size();
    a["labeled_residues"] = pos.size();
    if (!pos.empty()) {
      const MatchReport m = ca_precision_recall(pos, truth_ca, cut);
      std::size_t same_type = 0, same_index = 0;
      for (const auto& [i, j] : m.match_pairs) {
        const auto& tr = truth.chains.front().residues;
        std::size_t seen = 0;
        for (const auto& res : tr) {
          if (!res.ca()) continue;
          if (seen++ != j) continue;
          if (res.aa == types[i]) ++same_type;
          if (res.seq_num == numbers[i]) {
            ++same_index;
            covered.push_back(res.seq_num);
          }
        }
      }
      const double matched = static_cast<double>(m.match_pairs.size());
      a["matched_residues"] = m.match_pairs.size();
      a["aa_precision"] = matched > 0 ? same_type / matched : 0.0;
      a["index_accuracy"] = matched > 0 ? same_index / matched : 0.0;
    }
    report["alignment"] = a;
  }

  const fs::path fit_path = out_path(config, "fitted.pdb");
  if (fs::exists(fit_path)) {
    const Structure model = select_chain(read_structure_file(fit_path.string()), config.chain);
    ojson f;
    f["tm_score"] = tm_score(model, truth);
    std::vector<Vec3> a, b, ac, bc;
    std::sort(covered.begin(), covered.end());
    for (const auto& r : truth.chains.front().residues) {
      const Atom* ca = r.ca();
      if (!ca) continue;
      for (const auto& mr : model.chains.front().residues) {
        if (mr.seq_num != r.seq_num || !mr.ca()) continue;
        a.push_back(mr.ca()->position);
        b.push_back(ca->position);
        if (std::binary_search(covered.begin(), covered.end(), r.seq_num)) {
          ac.push_back(mr.ca()->position);
          bc.push_back(ca->position);
        }
      }
    }
    if (!a.empty()) f["rmsd"] = rmsd(a, b);
    if (!ac.empty()) f["rmsd_covered"] = rmsd(ac, bc);
    f["covered_residues"] = ac.size();
    report["fit"] = f;
  }
  write_text_file(out_path(config, "eval.json").string(), report.dump(2) + "\n");
  return report;
}

std::vector<PruningPoint> pruning_sweep(const Structure& truth, const NoiseSpec& noise, const Thresholds& thresholds,
                                        std::span<const std::size_t> min_lens, int seeds, double grid_padding) {
  const FeatureGrids labels = generate_labels(truth, grid_spec_for(truth, grid_padding));
  const auto truth_ca = ca_positions(truth.chains.front());
  std::vector<PruningPoint> points(min_lens.size());
  for (std::size_t i = 0; i < min_lens.size(); ++i) points[i].min_len = min_lens[i];
  TraceOptions opts;
  opts.epsilon_sq = thresholds.epsilon_sq;
  for (int s = 0; s < seeds; ++s) {
    NoiseSpec n = noise;
    n.seed = noise.seed + static_cast<std::uint64_t>(s);
    const auto frags = trace_fragments(extract_candidates(noisy_grids(labels, n), thresholds.detection), opts);
    for (auto& p : points) {
      const auto kept = prune_fragments(frags, p.min_len);
      const MatchReport m = ca_precision_recall(fragment_positions(kept), truth_ca, thresholds.match_cutoff);
      p.precision += m.precision / seeds;
      p.recall += m.recall / seeds;
      p.fragments += static_cast<double>(kept.size()) / seeds;
    }
  }
  return points;
}

AaComparison aa_labeling_comparison(const Structure& truth, const Sequence& sequence, const NoiseSpec& noise,
                                    const Thresholds& thresholds, std::size_t min_fragment, double grid_padding) {
  const FeatureGrids labels = generate_labels(truth, grid_spec_for(truth, grid_padding));
  TraceOptions opts;
  opts.epsilon_sq = thresholds.epsilon_sq;
  const auto frags = prune_fragments(
      trace_fragments(extract_candidates(noisy_grids(labels, noise), thresholds.detection), opts), min_fragment);

  AlignOptions ungated;
  ungated.confidence_threshold = -std::numeric_limits<double>::infinity();
  const std::vector<Sequence> seqs{sequence};
  std::vector<Vec3> pos;
  std::vector<AminoAcid> argmax, joint;
  AaComparison out;
  for (const auto& f : frags) {
    if (f.size() > sequence.length()) continue;
    const auto r = label_fragment(f, seqs, ungated, {}, 0);
    const auto& lf = std::get<LabeledFragment>(r);
    const auto am = argmax_types(f);
    for (std::size_t k = 0; k < f.size(); ++k) {
      pos.push_back(f.residues[k].position);
      argmax.push_back(am[k]);
      joint.push_back(lf.aa_assignment[k]);
    }
    ++out.fragments;
  }
  out.residues = pos.size();
  if (pos.empty()) throw DataError("aa_labeling_comparison: no fragments long enough");
  out.argmax_precision = aa_precision(pos, argmax, truth.chains.front(), thresholds.match_cutoff);
  out.joint_precision = aa_precision(pos, joint, truth.chains.front(), thresholds.match_cutoff);
  return out;
}

void cmd_ablate_prune(const PipelineConfig& config) {
  const Structure truth = load_chain(config, config.structure, "structure");
  NoiseSpec noise = config.noise;
  noise.seed = config.seed;
  const auto points = pruning_sweep(truth, noise, config.thresholds, config.ablation.min_lens, config.ablation.seeds,
                                    config.grid_padding);
  std::ostringstream out;
  out << "min_len\tprecision\trecall\tfragments\n";
  for (const auto& p : points) out << p.min_len << "\t" << p.precision << "\t" << p.recall << "\t" << p.fragments << "\n";
  write_text_file(out_path(config, "pruning_sweep.tsv").string(), out.str());
  log_line("ablate-prune", std::to_string(points.size()) + " thresholds over " + std::to_string(config.ablation.seeds) +
                               " seeds");
}

void cmd_ablate_aa(const PipelineConfig& config) {
  const Structure truth = load_chain(config, config.structure, "structure");
  const Sequence seq = load_sequence(config);
  std::ostringstream out;
  out << "seed\tfragments\tresidues\targmax_precision\tjoint_precision\n";
  double am = 0.0, jt = 0.0;
  for (int s = 0; s < config.ablation.seeds; ++s) {
    NoiseSpec noise = config.noise;
    noise.seed = config.seed + static_cast<std::uint64_t>(s);
    const auto c = aa_labeling_comparison(truth, seq, noise, config.thresholds, config.ablation.aa_min_fragment,
                                          config.grid_padding);
    out << noise.seed << "\t" << c.fragments << "\t" << c.residues << "\t" << c.argmax_precision << "\t"
        << c.joint_precision << "\n";
    am += c.argmax_precision / config.ablation.seeds;
    jt += c.joint_precision / config.ablation.seeds;
  }
  out << "mean\t\t\t" << am << "\t" << jt << "\n";
  write_text_file(out_path(config, "aa_labeling.tsv").string(), out.str());
  log_line("ablate-aa", "argmax " + std::to_string(am) + ", joint " + std::to_string(jt));
}

}  // namespace cryofit
