#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "molrl/molecule.hpp"

using namespace molrl::chem;

namespace {

Molecule parsed(const std::string& smi) {
  auto r = parse_smiles(smi);
  REQUIRE_MESSAGE(r.ok(), smi, ": ", r.message);
  return *r.mol;
}

Molecule permute(const Molecule& m, const std::vector<int>& perm) {
  Molecule out;
  out.atoms.resize(m.atoms.size());
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    Atom a = m.atoms[i];
    a.index = perm[i];
    out.atoms[perm[i]] = a;
  }
  for (const auto& b : m.bonds) out.bonds.push_back({perm[b.a], perm[b.b], b.order});
  return out;
}

}  // namespace

TEST_CASE("benzene parses to alternating 6-ring") {
  auto m = parsed("C1=CC=CC=C1");
  CHECK(m.atoms.size() == 6);
  CHECK(m.bonds.size() == 6);
  int doubles = 0;
  for (const auto& b : m.bonds)
    if (b.order == BondOrder::Double) ++doubles;
  CHECK(doubles == 3);
  for (const auto& a : m.atoms) {
    CHECK(a.element == "C");
    CHECK(a.total_h() == 1);
  }
}

TEST_CASE("aromatic benzene kekulizes to the same graph") {
  CHECK(canonical_form(parsed("c1ccccc1")) == canonical_form(parsed("C1=CC=CC=C1")));
}

TEST_CASE("pyridine and pyrrole kekulize") {
  auto pyridine = parsed("c1ccncc1");
  CHECK(formula(pyridine) == std::map<std::string, int>{{"C", 5}, {"H", 5}, {"N", 1}});
  auto pyrrole = parsed("c1cc[nH]c1");
  CHECK(formula(pyrrole) == std::map<std::string, int>{{"C", 4}, {"H", 5}, {"N", 1}});
}

TEST_CASE("unclosed ring bond is a ring-closure failure") {
  auto r = parse_smiles("C1CC");
  REQUIRE_FALSE(r.ok());
  CHECK(r.reason == InvalidReason::RingClosure);
}

TEST_CASE("pentavalent carbon is a valence failure") {
  auto r = parse_smiles("C(C)(C)(C)(C)C");
  REQUIRE_FALSE(r.ok());
  CHECK(r.reason == InvalidReason::Valence);
}

TEST_CASE("parse failures carry exactly one of the four reasons") {
  CHECK(parse_smiles(")C").reason == InvalidReason::Syntax);
  CHECK(parse_smiles("C)(").reason == InvalidReason::Syntax);
  CHECK(parse_smiles("C1CC1C2").reason == InvalidReason::RingClosure);
  CHECK(parse_smiles("O=C=O=C").reason == InvalidReason::Valence);
  CHECK(parse_smiles("C.C").reason == InvalidReason::UnsupportedFeature);
  CHECK(parse_smiles("[13C]").reason == InvalidReason::UnsupportedFeature);
  CHECK(parse_smiles("[Xe]").reason == InvalidReason::UnsupportedFeature);
  CHECK(parse_smiles("").reason == InvalidReason::Syntax);
}

TEST_CASE("stereo tokens are stripped with a count") {
  auto r = parse_smiles("F/C=C/F");
  REQUIRE(r.ok());
  CHECK(r.stereo_stripped == 2);
  auto r2 = parse_smiles("N[C@@H](C)C(=O)O");
  REQUIRE(r2.ok());
  CHECK(r2.stereo_stripped == 2);
}

TEST_CASE("write round trip") {
  for (const char* smi : {"CCO", "C", "C1=CC=CC=C1", "CC(=O)NC1=CC=CC=C1", "N#CC(Br)CCl",
                          "C[N+](C)(C)C", "CC(=O)[O-]", "O=C1CCCCC1", "FC(F)(F)C1=CC=CC=C1O"}) {
    auto m = parsed(smi);
    auto again = parse_smiles(write_smiles(m));
    REQUIRE_MESSAGE(again.ok(), smi, " rewritten as ", write_smiles(m), ": ", again.message);
    CHECK(canonical_form(m) == canonical_form(*again.mol));
  }
  CHECK(write_smiles(parsed("C")) == "C");
}

TEST_CASE("canonical form ignores traversal direction") {
  CHECK(canonical_form(parsed("OCC")) == canonical_form(parsed("CCO")));
}

TEST_CASE("canonical form invariant under atom permutation") {
  auto m = parsed("CC(=O)NC1=CC=C(OCC(F)(F)F)C=C1");  // 20 heavy atoms? close enough
  const std::string ref = canonical_form(m);
  std::mt19937_64 rng(17);
  std::vector<int> perm(m.atoms.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < 1000; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(canonical_form(permute(m, perm)) == ref);
  }
}

TEST_CASE("formulas") {
  CHECK(formula(parsed("C1=CC=CC=C1")) == std::map<std::string, int>{{"C", 6}, {"H", 6}});
  CHECK(formula(parsed("CCO")) == std::map<std::string, int>{{"C", 2}, {"H", 6}, {"O", 1}});
  CHECK(formula(parsed("C")) == std::map<std::string, int>{{"C", 1}, {"H", 4}});
}

TEST_CASE("heavy atom counts") {
  CHECK(heavy_atom_count(parsed("C1=CC=CC=C1")) == 6);
  CHECK(heavy_atom_count(parsed("CCO")) == 3);
  CHECK(heavy_atom_count(parsed("C")) == 1);
}

TEST_CASE("charged and bracket atoms keep valence accounting") {
  auto m = parsed("C[N+](C)(C)C");
  int n = -1;
  for (const auto& a : m.atoms)
    if (a.element == "N") n = a.index;
  REQUIRE(n >= 0);
  CHECK(m.atoms[n].formal_charge == 1);
  CHECK(m.bond_order_sum(n) == 4);
  CHECK(m.atoms[n].total_h() == 0);
}

TEST_CASE("no parsed molecule violates the valence table") {
  for (const char* smi : {"CCO", "c1ccccc1", "N#N", "O=C=O", "CC(=O)[O-]", "C[NH3+]"}) {
    auto m = parsed(smi);
    for (const auto& a : m.atoms)
      CHECK(m.bond_order_sum(a.index) + a.total_h() <=
            max_valence(a.element, a.formal_charge));
  }
}
