#include "cryofit/structio.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cryofit/errors.hpp"

namespace cryofit {

namespace {

constexpr std::array<std::string_view, kNumAminoAcids> kThreeLetter = {
    "ALA", "CYS", "ASP", "GLU", "PHE", "GLY", "HIS", "ILE", "LYS", "LEU",
    "MET", "ASN", "PRO", "GLN", "ARG", "SER", "THR", "VAL", "TRP", "TYR"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view column(std::string_view line, std::size_t first, std::size_t last) {
  // 1-based inclusive PDB column range; short lines yield a truncated field.
  if (line.size() < first) return {};
  return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

double parse_real(std::string_view field, std::size_t line_no, const char* what) {
  const auto t = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw DataError("PDB line " + std::to_string(line_no) + ": malformed " + what);
  return v;
}

int parse_int(std::string_view field, std::size_t line_no, const char* what) {
  const auto t = trim(field);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw DataError("PDB line " + std::to_string(line_no) + ": malformed " + what);
  return v;
}

}  // namespace

char one_letter(AminoAcid aa) { return kAminoAcidLetters[static_cast<int>(aa)]; }

std::string_view three_letter(AminoAcid aa) { return kThreeLetter[static_cast<int>(aa)]; }

std::optional<AminoAcid> from_one_letter(char c) {
  const auto pos = kAminoAcidLetters.find(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (pos == std::string_view::npos) return std::nullopt;
  return static_cast<AminoAcid>(pos);
}

std::optional<AminoAcid> from_three_letter(std::string_view name) {
  if (name == "MSE") return AminoAcid::M;
  for (int i = 0; i < kNumAminoAcids; ++i)
    if (kThreeLetter[i] == name) return static_cast<AminoAcid>(i);
  return std::nullopt;
}

const Atom* Residue::find_atom(std::string_view name) const {
  for (const auto& a : atoms)
    if (a.name == name) return &a;
  return nullptr;
}

const Chain* Structure::find_chain(std::string_view id) const {
  for (const auto& c : chains)
    if (c.id == id) return &c;
  return nullptr;
}

std::size_t Structure::atom_count() const {
  std::size_t n = 0;
  for (const auto& c : chains)
    for (const auto& r : c.residues) n += r.atoms.size();
  return n;
}

std::string Sequence::to_string() const {
  std::string s;
  s.reserve(residues.size());
  for (auto aa : residues) s.push_back(one_letter(aa));
  return s;
}

std::vector<AaDistribution> one_hot(const Sequence& seq) {
  std::vector<AaDistribution> rows(seq.length());
  for (std::size_t i = 0; i < seq.length(); ++i) {
    rows[i].fill(0.0);
    rows[i][static_cast<int>(seq.residues[i])] = 1.0;
  }
  return rows;
}

Structure parse_structure(std::string_view text, std::vector<std::string>* warnings) {
  Structure s;
  bool any_atom = false;
  // Residue currently being filled: (chain index, seq_num), or skipped.
  int cur_chain = -1;
  int cur_seq = 0;
  bool cur_skipped = false;
  std::string cur_name;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const bool is_atom = line.starts_with("ATOM  ") || line.starts_with("ATOM ");
    const bool is_het = line.starts_with("HETATM");
    if (!is_atom && !is_het) continue;
    if (line.size() < 54) throw DataError("PDB line " + std::to_string(line_no) + ": record shorter than 54 columns");

    const std::string res_name(trim(column(line, 18, 20)));
    if (is_het && res_name != "MSE") continue;
    any_atom = true;

    const char altloc = line[16];
    if (altloc != ' ' && altloc != 'A') continue;
    if (line[26] != ' ') throw DataError("PDB line " + std::to_string(line_no) + ": insertion codes are not supported");

    const std::string chain_id(trim(column(line, 21, 22)));
    const int seq_num = parse_int(column(line, 23, 26), line_no, "residue number");
    const Vec3 p{parse_real(column(line, 31, 38), line_no, "x coordinate"),
                 parse_real(column(line, 39, 46), line_no, "y coordinate"),
                 parse_real(column(line, 47, 54), line_no, "z coordinate")};

    int chain_index = -1;
    for (std::size_t c = 0; c < s.chains.size(); ++c)
      if (s.chains[c].id == chain_id) chain_index = static_cast<int>(c);
    if (chain_index < 0) {
      s.chains.push_back({chain_id, {}});
      chain_index = static_cast<int>(s.chains.size()) - 1;
    }

    const bool new_residue = chain_index != cur_chain || seq_num != cur_seq || res_name != cur_name;
    if (new_residue) {
      cur_chain = chain_index;
      cur_seq = seq_num;
      cur_name = res_name;
      auto& residues = s.chains[chain_index].residues;
      if (!residues.empty() && seq_num <= residues.back().seq_num)
        throw DataError("PDB line " + std::to_string(line_no) + ": residue numbers not strictly increasing in chain '" +
                        chain_id + "'");
      const auto aa = from_three_letter(res_name);
      cur_skipped = !aa.has_value();
      if (cur_skipped) {
        if (warnings) warnings->push_back("skipping unknown residue " + res_name + " " + std::to_string(seq_num));
        continue;
      }
      residues.push_back({seq_num, *aa, {}});
    }
    if (cur_skipped) continue;

    std::string element(trim(line.size() >= 78 ? column(line, 77, 78) : std::string_view{}));
    std::string atom_name(trim(column(line, 13, 16)));
    if (element.empty() && !atom_name.empty()) element = atom_name.substr(0, 1);
    s.chains[chain_index].residues.back().atoms.push_back({std::move(atom_name), std::move(element), p});
  }
  if (!any_atom) throw DataError("PDB: no ATOM records");
  std::erase_if(s.chains, [](const Chain& c) { return c.residues.empty(); });
  return s;
}

std::string write_structure(const Structure& structure) {
  if (structure.chains.empty()) throw std::invalid_argument("write_structure: structure has no chains");
  std::string out;
  char buf[96];
  int serial = 1;
  for (const auto& chain : structure.chains) {
    if (chain.residues.empty()) throw std::invalid_argument("write_structure: chain '" + chain.id + "' is empty");
    if (chain.id.size() > 2) throw std::invalid_argument("write_structure: chain id longer than 2 characters");
    const std::string cid = chain.id.size() == 2 ? chain.id : " " + (chain.id.empty() ? std::string(" ") : chain.id);
    const Residue* last = nullptr;
    for (const auto& res : chain.residues) {
      for (const auto& atom : res.atoms) {
        for (int a = 0; a < 3; ++a) {
          const double v = atom.position[a];
          if (!std::isfinite(v) || v >= 9999.9995 || v <= -999.9995)
            throw std::invalid_argument("write_structure: coordinate out of PDB column range");
        }
        // Names shorter than four characters start in column 14.
        const std::string name = atom.name.size() >= 4 ? atom.name.substr(0, 4) : " " + atom.name;
        std::snprintf(buf, sizeof buf, "ATOM  %5d %-4s %3s%2s%4d    %8.3f%8.3f%8.3f%6.2f%6.2f          %2s\n",
                      serial % 100000, name.c_str(), std::string(three_letter(res.aa)).c_str(), cid.c_str(),
                      res.seq_num, atom.position.x, atom.position.y, atom.position.z, 1.0, 0.0,
                      atom.element.c_str());
        out += buf;
        ++serial;
      }
      last = &res;
    }
    std::snprintf(buf, sizeof buf, "TER   %5d      %3s%2s%4d\n", serial % 100000,
                  std::string(three_letter(last->aa)).c_str(), cid.c_str(), last->seq_num);
    out += buf;
    ++serial;
  }
  out += "END\n";
  return out;
}

Sequence parse_fasta(std::string_view text) {
  Sequence seq;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '>') {
      if (seen_header && !seq.residues.empty()) break;  // first record only
      seen_header = true;
      continue;
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      if (c == '*' && i + 1 == line.size()) continue;  // terminal stop marker
      const auto aa = from_one_letter(c);
      if (!aa) throw DataError(std::string("FASTA: illegal residue character '") + c + "'");
      seq.residues.push_back(*aa);
    }
  }
  if (seq.residues.empty()) throw DataError("FASTA: empty sequence");
  return seq;
}

std::string write_fasta(const Sequence& seq, std::string_view name) {
  std::string out = ">" + std::string(name) + "\n";
  const auto s = seq.to_string();
  for (std::size_t i = 0; i < s.size(); i += 60) out += s.substr(i, 60) + "\n";
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

Structure read_structure_file(const std::string& path, std::vector<std::string>* warnings) {
  try {
    return parse_structure(read_text_file(path), warnings);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Sequence read_fasta_file(const std::string& path) {
  try {
    return parse_fasta(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<Vec3> ca_positions(const Chain& chain) {
  std::vector<Vec3> out;
  out.reserve(chain.residues.size());
  for (const auto& r : chain.residues)
    if (const auto* ca = r.ca()) out.push_back(ca->position);
  return out;
}

}  // namespace cryofit
