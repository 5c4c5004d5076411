#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "molrl/fingerprint.hpp"
#include "molrl/molecule.hpp"

using namespace molrl::fp;
using molrl::chem::Atom;
using molrl::chem::Molecule;
using molrl::chem::parse_smiles;

namespace {

Molecule parsed(const std::string& smi) {
  auto r = parse_smiles(smi);
  REQUIRE(r.ok());
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

TEST_CASE("fingerprint is a graph invariant") {
  auto a = fingerprint(parsed("C1=CC=CC=C1"));
  auto b = fingerprint(parsed("C=1C=CC=CC1"));
  CHECK(a.set_bits == b.set_bits);
}

TEST_CASE("methane has between 1 and radius+1 set bits") {
  auto f = fingerprint(parsed("C"), 2, 2048);
  CHECK(f.set_bits.size() >= 1);
  CHECK(f.set_bits.size() <= 3);
}

TEST_CASE("butane and isobutane differ") {
  auto a = fingerprint(parsed("CCCC"));
  auto b = fingerprint(parsed("CC(C)C"));
  CHECK(a.set_bits != b.set_bits);
}

TEST_CASE("tanimoto definition cases") {
  Fingerprint a, b;
  a.set_bits = {1, 2, 3, 4};
  b.set_bits = a.set_bits;
  CHECK(tanimoto(a, b) == 1.0);
  b.set_bits = {9, 10, 11};
  CHECK(tanimoto(a, b) == 0.0);
  a.set_bits = {1, 2, 3, 4};
  b.set_bits = {2, 3, 4, 5};  // intersection 3, union 5
  CHECK(tanimoto(a, b) == doctest::Approx(0.6));
  a.set_bits.clear();
  b.set_bits.clear();
  CHECK(tanimoto(a, b) == 1.0);
  Fingerprint c;
  c.bit_size = 1024;
  CHECK_THROWS(tanimoto(a, c));
}

TEST_CASE("tanimoto is symmetric and bounded") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> bit(0, 2047), n(0, 40);
  for (int t = 0; t < 200; ++t) {
    Fingerprint a, b;
    for (int i = n(rng); i > 0; --i) a.set_bits.insert(bit(rng));
    for (int i = n(rng); i > 0; --i) b.set_bits.insert(bit(rng));
    const double ab = tanimoto(a, b);
    CHECK(ab == tanimoto(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(tanimoto(a, a) == 1.0);
  }
}

TEST_CASE("fingerprint invariant under atom re-indexing") {
  auto m = parsed("CC(=O)NC1=CC=C(O)C=C1");
  auto ref = fingerprint(m).set_bits;
  std::mt19937_64 rng(11);
  std::vector<int> perm(m.atoms.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < 500; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(fingerprint(permute(m, perm)).set_bits == ref);
  }
}

TEST_CASE("diversity cases") {
  auto benzene = fingerprint(parsed("C1=CC=CC=C1"));
  std::vector<Fingerprint> same(100, benzene);
  CHECK(diversity(same) == 0.0);
  CHECK(diversity({benzene}) == 0.0);

  Fingerprint a, b;
  a.set_bits = {1, 2};
  b.set_bits = {2, 3, 4};  // tanimoto 1/4
  CHECK(diversity({a, b}) == doctest::Approx(0.75));
}

TEST_CASE("diversity equals brute force pair loop and ignores ordering") {
  std::vector<std::string> smis = {"CCO",          "CCCC",       "CC(C)C",  "C1=CC=CC=C1",
                                   "CC(=O)O",      "CCN",        "OCC(O)CO", "ClCCBr",
                                   "N#CC1CCCC1",   "CC(=O)NC"};
  std::vector<Fingerprint> fps;
  for (const auto& s : smis) fps.push_back(fingerprint(parsed(s)));
  double brute = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < fps.size(); ++i)
    for (std::size_t j = 0; j < fps.size(); ++j)
      if (i < j) {
        brute += 1.0 - tanimoto(fps[i], fps[j]);
        ++pairs;
      }
  CHECK(diversity(fps) == doctest::Approx(brute / pairs).epsilon(1e-12));
  auto shuffled = fps;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(diversity(shuffled) == doctest::Approx(diversity(fps)).epsilon(1e-12));
}
