#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cryofit/geometry.hpp"

namespace cryofit {

// The 20 canonical amino acids, ordered by one-letter code. The enum value
// is the column index used by every AA-type distribution in the project.
enum class AminoAcid : int { A, C, D, E, F, G, H, I, K, L, M, N, P, Q, R, S, T, V, W, Y };

inline constexpr int kNumAminoAcids = 20;
inline constexpr std::string_view kAminoAcidLetters = "ACDEFGHIKLMNPQRSTVWY";

using AaDistribution = std::array<double, kNumAminoAcids>;

char one_letter(AminoAcid aa);
std::string_view three_letter(AminoAcid aa);
std::optional<AminoAcid> from_one_letter(char c);
// Accepts canonical three-letter names plus MSE, which maps to MET.
std::optional<AminoAcid> from_three_letter(std::string_view name);

struct Atom {
  std::string name;
  std::string element;
  Vec3 position;
};

struct Residue {
  int seq_num = 0;  // author numbering (resSeq)
  AminoAcid aa = AminoAcid::A;
  std::vector<Atom> atoms;

  const Atom* find_atom(std::string_view name) const;
  const Atom* ca() const { return find_atom("CA"); }
};

struct Chain {
  std::string id;
  std::vector<Residue> residues;
};

struct Structure {
  std::vector<Chain> chains;

  const Chain* find_chain(std::string_view id) const;
  std::size_t atom_count() const;
};

struct Sequence {
  std::vector<AminoAcid> residues;

  std::size_t length() const { return residues.size(); }
  std::string to_string() const;
};

// L x 20 one-hot encoding, one row per sequence position.
std::vector<AaDistribution> one_hot(const Sequence& seq);

/// Reads ATOM records (fixed columns, wwPDB v3.3). HETATM records are
/// skipped except MSE, which is read as MET. Alternate locations other than
/// blank/'A' are dropped. Residues with unknown names are skipped and
/// reported through `warnings` when given. Throws DataError on malformed
/// columns, insertion codes, non-increasing residue numbers or when no ATOM
/// record is present.
Structure parse_structure(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// Fixed-column ATOM records, one TER per chain and a closing END.
/// Chain ids of one or two characters are written into columns 21-22.
std::string write_structure(const Structure& structure);

Sequence parse_fasta(std::string_view text);
std::string write_fasta(const Sequence& seq, std::string_view name);

Structure read_structure_file(const std::string& path, std::vector<std::string>* warnings = nullptr);
Sequence read_fasta_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

// Cα positions of a chain in residue order; residues without CA are skipped.
std::vector<Vec3> ca_positions(const Chain& chain);

}  // namespace cryofit
