#include "molrl/molecule.hpp"

#include <algorithm>
#include <stdexcept>

namespace molrl::chem {

std::vector<std::vector<std::pair<int, BondOrder>>> Molecule::adjacency() const {
  std::vector<std::vector<std::pair<int, BondOrder>>> adj(atoms.size());
  for (const auto& b : bonds) {
    adj[b.a].emplace_back(b.b, b.order);
    adj[b.b].emplace_back(b.a, b.order);
  }
  return adj;
}

int Molecule::degree(int atom) const {
  int d = 0;
  for (const auto& b : bonds)
    if (b.a == atom || b.b == atom) ++d;
  return d;
}

int Molecule::bond_order_sum(int atom) const {
  int s = 0;
  for (const auto& b : bonds)
    if (b.a == atom || b.b == atom) s += static_cast<int>(b.order);
  return s;
}

bool Molecule::has_bond(int a, int b) const {
  for (const auto& bd : bonds)
    if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) return true;
  return false;
}

const char* invalid_reason_name(InvalidReason r) {
  switch (r) {
    case InvalidReason::Syntax: return "syntax";
    case InvalidReason::RingClosure: return "ring-closure";
    case InvalidReason::Valence: return "valence";
    case InvalidReason::UnsupportedFeature: return "unsupported-feature";
  }
  return "?";
}

namespace {
const std::map<std::string, std::vector<int>> kValences = {
    {"B", {3}},  {"C", {4}},       {"N", {3, 5}}, {"O", {2}},  {"P", {3, 5}},
    {"S", {2, 4, 6}}, {"F", {1}},  {"Cl", {1}},   {"Br", {1}}, {"I", {1}},
    {"Si", {4}},
};
}

bool element_supported(const std::string& symbol) { return kValences.count(symbol) > 0; }

const std::vector<int>& allowed_valences(const std::string& symbol) {
  auto it = kValences.find(symbol);
  if (it == kValences.end()) throw std::invalid_argument("unsupported element " + symbol);
  return it->second;
}

int max_valence(const std::string& symbol, int charge) {
  int mx = 0;
  for (int v : allowed_valences(symbol)) mx = std::max(mx, v + charge);
  return std::max(mx, 0);
}

std::optional<std::string> sanitize(Molecule& m) {
  for (auto& a : m.atoms) {
    if (!element_supported(a.element)) return "unsupported element " + a.element;
    const int bsum = m.bond_order_sum(a.index);
    if (a.bracket) {
      // bracket atoms: hydrogen count fixed, only validate
      if (bsum + a.explicit_h > max_valence(a.element, a.formal_charge))
        return a.element + " valence " + std::to_string(bsum + a.explicit_h) + " exceeded";
      a.implicit_h = 0;
    } else {
      int fill = -1;
      for (int v : allowed_valences(a.element)) {
        const int eff = v + a.formal_charge;
        if (eff >= bsum) {
          fill = eff - bsum;
          break;
        }
      }
      if (fill < 0)
        return a.element + " valence " + std::to_string(bsum) + " exceeded";
      a.implicit_h = fill;
    }
  }
  return std::nullopt;
}

std::map<std::string, int> formula(const Molecule& m) {
  std::map<std::string, int> counts;
  for (const auto& a : m.atoms) {
    counts[a.element] += 1;
    counts["H"] += a.total_h();
  }
  if (counts["H"] == 0) counts.erase("H");
  return counts;
}

int heavy_atom_count(const Molecule& m) { return m.heavy_atom_count(); }

}  // namespace molrl::chem
