#include <algorithm>
#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "molrl/molecule.hpp"
#include "molrl/rng.hpp"

namespace molrl::chem {

namespace {

struct RawBond {
  int a, b;
  int order;       // 1,2,3; 0 = aromatic (to be kekulized)
};

struct Builder {
  Molecule mol;
  std::vector<RawBond> raw_bonds;
  int stereo_stripped = 0;
};

ParseResult fail(InvalidReason r, std::string msg, int stereo = 0) {
  ParseResult res;
  res.reason = r;
  res.message = std::move(msg);
  res.stereo_stripped = stereo;
  return res;
}

bool is_aromatic_symbol(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

// Kekulization: every aromatic atom that still lacks a pi bond must receive
// exactly one double bond along an aromatic edge (perfect matching on the
// needs-pi subgraph); remaining aromatic edges become single.
bool match_pi(const std::vector<std::vector<int>>& cand_adj, std::vector<int>& mate,
              const std::vector<bool>& needs, std::size_t i) {
  while (i < needs.size() && (!needs[i] || mate[i] >= 0)) ++i;
  if (i >= needs.size()) return true;
  for (int j : cand_adj[i]) {
    if (mate[j] >= 0) continue;
    mate[i] = j;
    mate[j] = static_cast<int>(i);
    if (match_pi(cand_adj, mate, needs, i + 1)) return true;
    mate[i] = mate[j] = -1;
  }
  return false;
}

std::optional<std::string> kekulize(Builder& bld) {
  Molecule& m = bld.mol;
  const std::size_t n = m.atoms.size();
  std::vector<int> arom_degree(n, 0);
  std::vector<int> deg(n, 0);
  std::vector<int> fixed_pi(n, 0);  // non-aromatic double/triple bonds touching the atom
  for (const auto& rb : bld.raw_bonds) {
    ++deg[rb.a];
    ++deg[rb.b];
    if (rb.order == 0) {
      ++arom_degree[rb.a];
      ++arom_degree[rb.b];
    } else if (rb.order > 1) {
      fixed_pi[rb.a] += rb.order - 1;
      fixed_pi[rb.b] += rb.order - 1;
    }
  }
  for (const auto& a : m.atoms)
    if (a.aromatic && arom_degree[a.index] < 2)
      return "aromatic atom " + a.element + " not in an aromatic ring";

  std::vector<bool> needs(n, false);
  for (const auto& a : m.atoms) {
    if (!a.aromatic) continue;
    if (fixed_pi[a.index] > 0) continue;  // exocyclic multiple bond supplies the pi electron
    int sigma = deg[a.index] + a.explicit_h;
    int target;
    std::string el = a.element;
    if (el == "C" && !a.bracket) {
      sigma = std::max(sigma, 3);  // implicit H fills the third sigma position
      target = 4;
    } else if (el == "C") {
      target = 4 + a.formal_charge;
    } else if (el == "N" || el == "P") {
      target = 3 + a.formal_charge;
    } else if (el == "O" || el == "S") {
      target = 2 + a.formal_charge;
    } else if (el == "B") {
      target = 3 + a.formal_charge;
    } else {
      return "aromatic " + el + " unsupported";
    }
    needs[a.index] = sigma < target;
  }

  std::vector<std::vector<int>> cand(n);
  for (const auto& rb : bld.raw_bonds) {
    if (rb.order == 0 && needs[rb.a] && needs[rb.b]) {
      cand[rb.a].push_back(rb.b);
      cand[rb.b].push_back(rb.a);
    }
  }
  std::vector<int> mate(n, -1);
  if (!match_pi(cand, mate, needs, 0)) return "no alternating bond assignment for aromatic ring";
  for (std::size_t i = 0; i < n; ++i)
    if (needs[i] && mate[i] < 0) return "no alternating bond assignment for aromatic ring";

  for (const auto& rb : bld.raw_bonds) {
    BondOrder order;
    if (rb.order == 0)
      order = (mate[rb.a] == rb.b) ? BondOrder::Double : BondOrder::Single;
    else
      order = static_cast<BondOrder>(rb.order);
    m.bonds.push_back({rb.a, rb.b, order});
  }
  for (auto& a : m.atoms) a.aromatic = false;
  return std::nullopt;
}

}  // namespace

ParseResult parse_smiles(const std::string& text) {
  Builder bld;
  Molecule& mol = bld.mol;
  struct RingOpen {
    int atom;
    int order;  // -1 = unspecified
  };
  std::map<int, RingOpen> open_rings;
  std::vector<int> branch_stack;
  int prev = -1;
  int pending_order = -1;  // -1 none, 0..3 explicit (0 = aromatic ':')
  std::size_t i = 0;

  auto add_atom = [&](Atom a) -> std::optional<std::string> {
    a.index = static_cast<int>(mol.atoms.size());
    mol.atoms.push_back(a);
    if (prev >= 0) {
      int order = pending_order;
      if (order == -1)
        order = (mol.atoms[prev].aromatic && a.aromatic) ? 0 : 1;
      if (order == 0 && !(mol.atoms[prev].aromatic && a.aromatic))
        return "aromatic bond between non-aromatic atoms";
      bld.raw_bonds.push_back({prev, a.index, order});
    } else if (pending_order != -1) {
      return "bond symbol before first atom";
    }
    prev = a.index;
    pending_order = -1;
    return std::nullopt;
  };

  while (i < text.size()) {
    const char c = text[i];
    if (c == '-') { pending_order = 1; ++i; continue; }
    if (c == '=') { pending_order = 2; ++i; continue; }
    if (c == '#') { pending_order = 3; ++i; continue; }
    if (c == ':') { pending_order = 0; ++i; continue; }
    if (c == '/' || c == '\\') { pending_order = 1; ++bld.stereo_stripped; ++i; continue; }
    if (c == '.')
      return fail(InvalidReason::UnsupportedFeature,
                  "multi-fragment input rejected (position " + std::to_string(i) + ")",
                  bld.stereo_stripped);
    if (c == '(') {
      if (prev < 0) return fail(InvalidReason::Syntax, "branch before first atom");
      branch_stack.push_back(prev);
      ++i;
      continue;
    }
    if (c == ')') {
      if (branch_stack.empty())
        return fail(InvalidReason::Syntax, "unmatched ')' at position " + std::to_string(i));
      prev = branch_stack.back();
      branch_stack.pop_back();
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
      int num;
      if (c == '%') {
        if (i + 2 >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
            !std::isdigit(static_cast<unsigned char>(text[i + 2])))
          return fail(InvalidReason::Syntax, "bad %ring number at position " + std::to_string(i));
        num = (text[i + 1] - '0') * 10 + (text[i + 2] - '0');
        i += 3;
      } else {
        num = c - '0';
        ++i;
      }
      if (prev < 0) return fail(InvalidReason::Syntax, "ring digit before first atom");
      auto it = open_rings.find(num);
      if (it == open_rings.end()) {
        open_rings[num] = {prev, pending_order};
        pending_order = -1;
      } else {
        const RingOpen ro = it->second;
        open_rings.erase(it);
        int order = pending_order;
        if (order == -1) order = ro.order;
        else if (ro.order != -1 && ro.order != order)
          return fail(InvalidReason::RingClosure, "conflicting ring bond orders");
        if (order == -1)
          order = (mol.atoms[prev].aromatic && mol.atoms[ro.atom].aromatic) ? 0 : 1;
        if (ro.atom == prev)
          return fail(InvalidReason::RingClosure, "ring closure to the same atom");
        for (const auto& rb : bld.raw_bonds)
          if ((rb.a == prev && rb.b == ro.atom) || (rb.a == ro.atom && rb.b == prev))
            return fail(InvalidReason::RingClosure, "duplicate ring bond");
        bld.raw_bonds.push_back({ro.atom, prev, order});
        pending_order = -1;
      }
      continue;
    }
    if (c == '[') {
      std::size_t j = i + 1;
      Atom a;
      a.bracket = true;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j])))
        return fail(InvalidReason::UnsupportedFeature,
                    "isotope labels unsupported (position " + std::to_string(j) + ")");
      // element symbol, aromatic lowercase allowed
      if (j < text.size() && std::isupper(static_cast<unsigned char>(text[j]))) {
        a.element = std::string(1, text[j]);
        ++j;
        if (j < text.size() && std::islower(static_cast<unsigned char>(text[j])) &&
            element_supported(a.element + text[j])) {
          a.element += text[j];
          ++j;
        }
      } else if (j < text.size() && is_aromatic_symbol(text[j])) {
        a.element = std::string(1, std::toupper(static_cast<unsigned char>(text[j])));
        a.aromatic = true;
        ++j;
      } else {
        return fail(InvalidReason::Syntax, "bad bracket atom at position " + std::to_string(i));
      }
      if (!element_supported(a.element))
        return fail(InvalidReason::UnsupportedFeature, "unsupported element " + a.element);
      while (j < text.size() && text[j] == '@') {
        ++bld.stereo_stripped;
        ++j;
      }
      if (j < text.size() && text[j] == 'H') {
        ++j;
        a.explicit_h = 1;
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          a.explicit_h = text[j] - '0';
          ++j;
        }
      }
      if (j < text.size() && (text[j] == '+' || text[j] == '-')) {
        const char sign = text[j];
        int mag = 0;
        while (j < text.size() && text[j] == sign) {
          ++mag;
          ++j;
        }
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          mag = text[j] - '0';
          ++j;
        }
        a.formal_charge = (sign == '+') ? mag : -mag;
      }
      if (j >= text.size() || text[j] != ']')
        return fail(InvalidReason::Syntax, "unterminated bracket atom at position " +
                                               std::to_string(i));
      if (auto err = add_atom(a)) return fail(InvalidReason::Syntax, *err);
      i = j + 1;
      continue;
    }
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (i + 1 < text.size() && std::islower(static_cast<unsigned char>(text[i + 1])) &&
          !is_aromatic_symbol(text[i + 1]) && element_supported(sym + text[i + 1]))
        sym += text[i + 1];
      // two-letter organic subset: Cl and Br only
      if (sym.size() == 1 && i + 1 < text.size() &&
          ((c == 'C' && text[i + 1] == 'l') || (c == 'B' && text[i + 1] == 'r')))
        sym += text[i + 1];
      if (!element_supported(sym))
        return fail(InvalidReason::Syntax,
                    "unknown atom symbol '" + sym + "' at position " + std::to_string(i));
      Atom a;
      a.element = sym;
      if (auto err = add_atom(a)) return fail(InvalidReason::Syntax, *err);
      i += sym.size();
      continue;
    }
    if (is_aromatic_symbol(c)) {
      Atom a;
      a.element = std::string(1, std::toupper(static_cast<unsigned char>(c)));
      a.aromatic = true;
      if (auto err = add_atom(a)) return fail(InvalidReason::Syntax, *err);
      ++i;
      continue;
    }
    return fail(InvalidReason::Syntax,
                std::string("unexpected character '") + c + "' at position " + std::to_string(i));
  }

  if (mol.atoms.empty()) return fail(InvalidReason::Syntax, "empty input");
  if (!branch_stack.empty()) return fail(InvalidReason::Syntax, "unclosed branch");
  if (pending_order != -1) return fail(InvalidReason::Syntax, "dangling bond symbol");
  if (!open_rings.empty())
    return fail(InvalidReason::RingClosure,
                "unclosed ring bond " + std::to_string(open_rings.begin()->first),
                bld.stereo_stripped);

  if (auto err = kekulize(bld)) return fail(InvalidReason::Valence, *err, bld.stereo_stripped);
  if (auto err = sanitize(bld.mol)) return fail(InvalidReason::Valence, *err, bld.stereo_stripped);

  ParseResult res;
  res.stereo_stripped = bld.stereo_stripped;
  res.mol = std::move(bld.mol);
  return res;
}

// ---------------- serialization ----------------

namespace {

bool needs_bracket(const Molecule& m, const Atom& a) {
  if (a.formal_charge != 0) return true;
  if (a.element == "Si") return true;
  if (!a.bracket) return false;
  // bracket atom whose H count the default fill would not reproduce
  Molecule probe = m;
  probe.atoms[a.index].bracket = false;
  auto err = sanitize(probe);
  return err.has_value() || probe.atoms[a.index].implicit_h != a.explicit_h + a.implicit_h;
}

std::string atom_text(const Molecule& m, const Atom& a) {
  if (!needs_bracket(m, a)) return a.element;
  std::string s = "[" + a.element;
  const int h = a.total_h();
  if (h == 1) s += "H";
  else if (h > 1) s += "H" + std::to_string(h);
  if (a.formal_charge > 0) s += (a.formal_charge == 1) ? "+" : "+" + std::to_string(a.formal_charge);
  if (a.formal_charge < 0) s += (a.formal_charge == -1) ? "-" : "-" + std::to_string(-a.formal_charge);
  return s + "]";
}

const char* bond_text(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
  }
  return "";
}

struct Writer {
  const Molecule& m;
  std::vector<std::vector<std::pair<int, BondOrder>>> adj;
  const std::vector<std::uint64_t>& key;  // visit priority, lower first
  std::vector<bool> visited;
  std::map<std::pair<int, int>, int> ring_digit;  // closure edge -> digit
  int next_digit = 1;
  std::string out;

  Writer(const Molecule& mol, const std::vector<std::uint64_t>& k)
      : m(mol), adj(mol.adjacency()), key(k), visited(mol.atoms.size(), false) {}

  std::vector<std::pair<int, BondOrder>> ordered_neighbors(int a) {
    auto nb = adj[a];
    std::sort(nb.begin(), nb.end(), [&](const auto& x, const auto& y) {
      if (key[x.first] != key[y.first]) return key[x.first] < key[y.first];
      return x.first < y.first;
    });
    return nb;
  }

  // pass 1: find ring-closure edges in traversal order
  void find_rings(int a, int parent) {
    visited[a] = true;
    for (const auto& [b, order] : ordered_neighbors(a)) {
      if (b == parent) { parent = -1; continue; }  // consume the tree edge once
      if (visited[b]) {
        auto edge = std::minmax(a, b);
        std::pair<int, int> e{edge.first, edge.second};
        if (!ring_digit.count(e)) ring_digit[e] = next_digit++;
      } else {
        find_rings(b, a);
      }
    }
  }

  void write(int a, int parent, BondOrder in_order, bool root) {
    visited[a] = true;
    if (!root) out += bond_text(in_order);
    out += atom_text(m, m.atoms[a]);
    auto nb = ordered_neighbors(a);
    // ring closure digits directly after the atom
    for (const auto& [b, order] : nb) {
      auto edge = std::minmax(a, b);
      auto it = ring_digit.find({edge.first, edge.second});
      if (it == ring_digit.end()) continue;
      if (visited[b]) out += bond_text(order);  // closing side carries the bond symbol
      const int d = it->second;
      out += (d < 10) ? std::to_string(d) : "%" + std::to_string(d);
    }
    std::vector<std::pair<int, BondOrder>> children;
    int consumed_parent = parent;
    for (const auto& [b, order] : nb) {
      if (b == consumed_parent) { consumed_parent = -1; continue; }
      auto edge = std::minmax(a, b);
      if (ring_digit.count({edge.first, edge.second})) continue;
      if (!visited[b]) children.emplace_back(b, order);
    }
    for (std::size_t i = 0; i < children.size(); ++i) {
      const bool last = (i + 1 == children.size());
      if (!last) out += "(";
      write(children[i].first, a, children[i].second, false);
      if (!last) out += ")";
    }
  }
};

std::string serialize(const Molecule& m, const std::vector<std::uint64_t>& key, int start) {
  Writer w1(m, key);
  w1.find_rings(start, -1);
  Writer w2(m, key);
  w2.ring_digit = w1.ring_digit;
  w2.next_digit = w1.next_digit;
  w2.write(start, -1, BondOrder::Single, true);
  return w2.out;
}

std::uint64_t initial_invariant(const Molecule& m, const Atom& a) {
  std::uint64_t h = 0x6d6f6c726cULL;
  for (char c : a.element) h = hash_combine(h, static_cast<std::uint64_t>(c));
  h = hash_combine(h, static_cast<std::uint64_t>(m.degree(a.index)));
  h = hash_combine(h, static_cast<std::uint64_t>(a.formal_charge + 16));
  h = hash_combine(h, static_cast<std::uint64_t>(a.total_h()));
  h = hash_combine(h, static_cast<std::uint64_t>(m.bond_order_sum(a.index)));
  return h;
}

std::size_t class_count(const std::vector<std::uint64_t>& inv) {
  auto s = inv;
  std::sort(s.begin(), s.end());
  return std::unique(s.begin(), s.end()) - s.begin();
}

void refine(const Molecule& m, std::vector<std::uint64_t>& inv) {
  const auto adj = m.adjacency();
  std::size_t classes = class_count(inv);
  for (std::size_t round = 0; round < m.atoms.size() + 2; ++round) {
    std::vector<std::uint64_t> next(inv.size());
    for (std::size_t i = 0; i < inv.size(); ++i) {
      std::vector<std::uint64_t> nb;
      for (const auto& [j, order] : adj[i])
        nb.push_back(hash_combine(static_cast<std::uint64_t>(order), inv[j]));
      std::sort(nb.begin(), nb.end());
      std::uint64_t h = inv[i];
      for (auto x : nb) h = hash_combine(h, x);
      next[i] = h;
    }
    const std::size_t nc = class_count(next);
    if (nc == classes && round > 0) break;
    inv = std::move(next);
    classes = nc;
    if (classes == inv.size()) break;
  }
}

std::string canonical_from(const Molecule& m, std::vector<std::uint64_t> inv, int depth) {
  refine(m, inv);
  // locate the smallest tied class
  std::map<std::uint64_t, std::vector<int>> classes;
  for (std::size_t i = 0; i < inv.size(); ++i) classes[inv[i]].push_back(static_cast<int>(i));
  for (const auto& [v, members] : classes) {
    if (members.size() < 2) continue;
    // branch on each member, keep the lexicographically smallest outcome
    std::string best;
    for (int a : members) {
      auto inv2 = inv;
      inv2[a] = mix64(inv2[a] ^ 0x7f4a7c15ULL);
      std::string cand = canonical_from(m, std::move(inv2), depth + 1);
      if (best.empty() || cand < best) best = cand;
    }
    return best;
  }
  int start = 0;
  for (std::size_t i = 1; i < inv.size(); ++i)
    if (inv[i] < inv[start]) start = static_cast<int>(i);
  return serialize(m, inv, start);
}

}  // namespace

std::string write_smiles(const Molecule& m) {
  std::vector<std::uint64_t> key(m.atoms.size());
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = i;
  return serialize(m, key, 0);
}

std::string canonical_form(const Molecule& m) {
  std::vector<std::uint64_t> inv(m.atoms.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = initial_invariant(m, m.atoms[i]);
  return canonical_from(m, std::move(inv), 0);
}

}  // namespace molrl::chem
