#ifndef MOLRL_MOLECULE_HPP
#define MOLRL_MOLECULE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace molrl::chem {

enum class BondOrder : int { Single = 1, Double = 2, Triple = 3 };

struct Atom {
  std::string element;      // "C", "Cl", ...
  bool aromatic = false;    // input flag; cleared once the ring is kekulized
  int formal_charge = 0;
  int explicit_h = 0;       // bracket-specified hydrogen count
  int implicit_h = 0;       // assigned during sanitization
  int index = 0;
  bool bracket = false;     // bracket atoms carry a fixed H count

  int total_h() const { return explicit_h + implicit_h; }
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  int heavy_atom_count() const { return static_cast<int>(atoms.size()); }
  std::vector<std::vector<std::pair<int, BondOrder>>> adjacency() const;
  int degree(int atom) const;
  int bond_order_sum(int atom) const;
  bool has_bond(int a, int b) const;
};

enum class InvalidReason { Syntax, RingClosure, Valence, UnsupportedFeature };

const char* invalid_reason_name(InvalidReason r);

struct ParseResult {
  std::optional<Molecule> mol;
  InvalidReason reason = InvalidReason::Syntax;
  std::string message;
  int stereo_stripped = 0;  // stereo tokens accepted and dropped

  bool ok() const { return mol.has_value(); }
};

// Element support. Parsing accepts the organic-chemistry subset plus bracket
// atoms; allowed valences follow the usual SMILES defaults, shifted by the
// formal charge.
bool element_supported(const std::string& symbol);
const std::vector<int>& allowed_valences(const std::string& symbol);
int max_valence(const std::string& symbol, int charge);

ParseResult parse_smiles(const std::string& text);

// Serialization in input atom order; output reparses to an isomorphic graph.
std::string write_smiles(const Molecule& m);

// Order-independent canonical string (Morgan-style invariant refinement with
// exhaustive tie-breaking); equal for isomorphic molecules.
std::string canonical_form(const Molecule& m);

// Element counts including hydrogens (implicit + explicit).
std::map<std::string, int> formula(const Molecule& m);

int heavy_atom_count(const Molecule& m);

// Validates valences and fills implicit hydrogens; used by parse_smiles and
// by the SELFIES decoder on freshly built graphs.
std::optional<std::string> sanitize(Molecule& m);

}  // namespace molrl::chem

#endif
