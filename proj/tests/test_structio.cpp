#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "cryofit/errors.hpp"
#include "cryofit/structio.hpp"

using namespace cryofit;

namespace {

std::string atom_line(int serial, const char* name, const char* res, char chain, int seq, double x, double y, double z,
                      const char* element = "C") {
  char buf[96];
  std::snprintf(buf, sizeof buf, "ATOM  %5d %-4s %3s %c%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s\n", serial, name,
                res, chain, seq, x, y, z, element);
  return buf;
}

// Three residues of an ideal helix, frozen alongside the golden file.
Structure helix3() {
  Structure s;
  Chain c{"A", {}};
  c.residues.push_back({1, AminoAcid::M,
                        {{"N", "N", {-1.204, -0.514, -1.446}}, {"CA", "C", {0.000, 0.000, 0.000}},
                         {"C", "C", {1.299, -0.789, 0.137}}, {"O", "O", {2.291, -0.300, 0.671}}}});
  c.residues.push_back({2, AminoAcid::K,
                        {{"N", "N", {1.287, -2.003, -0.389}}, {"CA", "C", {2.460, -2.860, -0.300}},
                         {"C", "C", {2.746, -3.250, 1.147}}, {"O", "O", {3.889, -3.392, 1.575}}}});
  c.residues.push_back({3, AminoAcid::W,
                        {{"N", "N", {1.700, -3.432, 1.934}}, {"CA", "C", {1.810, -3.770, 3.350}},
                         {"C", "C", {2.382, -2.600, 4.151}}, {"O", "O", {3.154, -2.782, 5.091}}}});
  s.chains.push_back(c);
  return s;
}

}  // namespace

TEST_CASE("structure: single CA record") {
  const Structure s = parse_structure(atom_line(1, "CA", "ALA", 'A', 1, 1.0, 2.0, 3.0));
  REQUIRE(s.chains.size() == 1);
  REQUIRE(s.chains[0].residues.size() == 1);
  REQUIRE(s.chains[0].residues[0].atoms.size() == 1);
  CHECK(s.chains[0].residues[0].aa == AminoAcid::A);
  CHECK(s.chains[0].residues[0].ca()->position == Vec3{1.0, 2.0, 3.0});
}

TEST_CASE("structure: two chains match a line-count oracle") {
  std::string text;
  int serial = 1;
  for (char ch : {'A', 'B'})
    for (int r = 1; r <= (ch == 'A' ? 4 : 7); ++r)
      for (const char* name : {"N", "CA", "C"}) text += atom_line(serial++, name, "GLY", ch, r, r, ch, 0.5);
  text += "HETATM  999  O   HOH W   1       0.000   0.000   0.000  1.00  0.00           O\n";
  std::set<std::pair<char, int>> pairs;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind("ATOM", 0) == 0) pairs.insert({line[21], std::stoi(line.substr(22, 4))});
  const Structure s = parse_structure(text);
  REQUIRE(s.chains.size() == 2);
  std::size_t total = 0;
  for (const auto& c : s.chains) total += c.residues.size();
  CHECK(total == pairs.size());
  CHECK(s.find_chain("A")->residues.size() == 4);
  CHECK(s.find_chain("B")->residues.size() == 7);
}

TEST_CASE("structure: round trip keeps coordinates at format precision") {
  const Structure s = helix3();
  const Structure back = parse_structure(write_structure(s));
  REQUIRE(back.chains.size() == 1);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(back.chains[0].residues[r].seq_num == s.chains[0].residues[r].seq_num);
    CHECK(back.chains[0].residues[r].aa == s.chains[0].residues[r].aa);
    for (std::size_t a = 0; a < 4; ++a) {
      const auto& p = back.chains[0].residues[r].atoms[a];
      CHECK(p.name == s.chains[0].residues[r].atoms[a].name);
      for (int k = 0; k < 3; ++k) CHECK(p.position[k] == doctest::Approx(s.chains[0].residues[r].atoms[a].position[k]).epsilon(1e-9));
    }
  }
  CHECK(write_structure(back) == write_structure(s));
}

TEST_CASE("structure: golden file") {
  std::ifstream f(std::string(CRYOFIT_TEST_DATA) + "/helix3.pdb");
  REQUIRE(f);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(write_structure(helix3()) == ss.str());
}

TEST_CASE("structure: errors and warnings") {
  CHECK_THROWS_AS(parse_structure("REMARK nothing\n"), DataError);
  Structure empty;
  empty.chains.push_back({"A", {}});
  CHECK_THROWS(write_structure(empty));
  Structure far = helix3();
  far.chains[0].residues[0].atoms[0].position.x = 12000.0;
  CHECK_THROWS(write_structure(far));

  std::vector<std::string> warnings;
  const Structure s = parse_structure(atom_line(1, "CA", "XYZ", 'A', 1, 0, 0, 0) + atom_line(2, "CA", "MSE", 'A', 2, 3.8, 0, 0),
                                      &warnings);
  CHECK(warnings.size() == 1);
  REQUIRE(s.chains.at(0).residues.size() == 1);
  CHECK(s.chains[0].residues[0].aa == AminoAcid::M);

  std::string ins = atom_line(1, "CA", "ALA", 'A', 1, 0, 0, 0);
  ins[26] = 'A';
  CHECK_THROWS_AS(parse_structure(ins), DataError);
  CHECK_THROWS_AS(parse_structure(atom_line(1, "CA", "ALA", 'A', 2, 0, 0, 0) + atom_line(2, "CA", "ALA", 'A', 1, 0, 0, 0)),
                  DataError);
}

TEST_CASE("fasta") {
  const Sequence s = parse_fasta(">x\nACD");
  CHECK(s.length() == 3);
  CHECK(s.residues == std::vector<AminoAcid>{AminoAcid::A, AminoAcid::C, AminoAcid::D});
  CHECK(parse_fasta(">x\nacd").residues == s.residues);

  const std::string l60(60, 'W'), l20(20, 'K');
  const Sequence m = parse_fasta(">long\n" + l60 + "\n" + l20 + "\n");
  CHECK(m.length() == l60.size() + l20.size());
  CHECK(parse_fasta(write_fasta(m, "long")).residues == m.residues);

  CHECK_THROWS_AS(parse_fasta(">x\nAC1D"), DataError);
  CHECK_THROWS_AS(parse_fasta(">x\n"), DataError);

  const auto oh = one_hot(m);
  REQUIRE(oh.size() == m.length());
  for (std::size_t i = 0; i < oh.size(); ++i) {
    double sum = 0;
    for (double v : oh[i]) sum += v;
    CHECK(sum == 1.0);
    CHECK(oh[i][static_cast<int>(m.residues[i])] == 1.0);
  }
}

TEST_CASE("amino acid codes") {
  for (int t = 0; t < kNumAminoAcids; ++t) {
    const auto aa = static_cast<AminoAcid>(t);
    CHECK(from_one_letter(one_letter(aa)) == aa);
    CHECK(from_three_letter(three_letter(aa)) == aa);
    CHECK(one_letter(aa) == kAminoAcidLetters[t]);
  }
  CHECK(!from_one_letter('X'));
}
