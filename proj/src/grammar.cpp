#include "molrl/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace molrl::grammar {

const char* grammar_name(Grammar g) { return g == Grammar::Smiles ? "SMILES" : "SELFIES"; }

std::optional<Grammar> grammar_from_name(const std::string& name) {
  std::string up;
  for (char c : name) up += std::toupper(static_cast<unsigned char>(c));
  if (up == "SMILES") return Grammar::Smiles;
  if (up == "SELFIES") return Grammar::Selfies;
  return std::nullopt;
}

Vocabulary::Vocabulary(Grammar g, std::vector<std::string> chemical_tokens) : grammar_(g) {
  std::set<std::string> uniq(chemical_tokens.begin(), chemical_tokens.end());
  uniq.erase("[BOS]");
  uniq.erase("[EOS]");
  uniq.erase("[PAD]");
  tokens_ = {"[BOS]", "[EOS]", "[PAD]"};
  tokens_.insert(tokens_.end(), uniq.begin(), uniq.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

std::optional<int> Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
  out << "#molrl-vocab v1 grammar=" << grammar_name(grammar_) << "\n";
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot read " + path);
  std::string header;
  std::getline(in, header);
  const std::string prefix = "#molrl-vocab v1 grammar=";
  if (header.rfind(prefix, 0) != 0)
    throw std::runtime_error("vocabulary: bad header in " + path);
  auto g = grammar_from_name(header.substr(prefix.size()));
  if (!g) throw std::runtime_error("vocabulary: unknown grammar in " + path);
  std::vector<std::string> toks;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) toks.push_back(line);
  if (toks.size() < 3 || toks[0] != "[BOS]" || toks[1] != "[EOS]" || toks[2] != "[PAD]")
    throw std::runtime_error("vocabulary: specials missing in " + path);
  return Vocabulary(*g, {toks.begin() + 3, toks.end()});
}

std::vector<std::string> split_smiles_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '[') {
      std::size_t j = text.find(']', i);
      if (j == std::string::npos) {
        out.push_back(text.substr(i));  // malformed; parser will reject
        break;
      }
      out.push_back(text.substr(i, j - i + 1));
      i = j + 1;
    } else if (c == '%' && i + 2 < text.size()) {
      out.push_back(text.substr(i, 3));
      i += 3;
    } else if ((c == 'C' && i + 1 < text.size() && text[i + 1] == 'l') ||
               (c == 'B' && i + 1 < text.size() && text[i + 1] == 'r') ||
               (c == 'S' && i + 1 < text.size() && text[i + 1] == 'i')) {
      out.push_back(text.substr(i, 2));
      i += 2;
    } else {
      out.push_back(std::string(1, c));
      ++i;
    }
  }
  return out;
}

TokenizeResult tokenize_smiles(const std::string& text, const Vocabulary& v) {
  TokenizeResult res;
  if (v.grammar() != Grammar::Smiles) {
    res.message = "vocabulary grammar is not SMILES";
    return res;
  }
  std::size_t max_len = 1;
  for (const auto& t : v.tokens()) max_len = std::max(max_len, t.size());
  TokenSequence seq;
  seq.ids.push_back(Vocabulary::kBos);
  std::size_t i = 0;
  while (i < text.size()) {
    int found = -1;
    std::size_t flen = 0;
    for (std::size_t len = std::min(max_len, text.size() - i); len >= 1; --len) {
      auto id = v.id_of(text.substr(i, len));
      if (id && *id > Vocabulary::kPad) {
        found = *id;
        flen = len;
        break;
      }
    }
    if (found < 0) {
      res.error_pos = i;
      res.message = "no vocabulary token matches input at position " + std::to_string(i);
      return res;
    }
    seq.ids.push_back(found);
    i += flen;
  }
  seq.ids.push_back(Vocabulary::kEos);
  seq.terminated = true;
  res.seq = std::move(seq);
  return res;
}

std::string untokenize(const TokenSequence& s, const Vocabulary& v) {
  std::string out;
  for (int id : s.ids)
    if (id > Vocabulary::kPad) out += v.token(id);
  return out;
}

// ---------------- SELFIES ----------------

namespace {

// Pinned hexadecimal index alphabet for Ring/Branch operands.
const std::vector<std::string> kIndexAlphabet = {
    "[C]",        "[Ring1]",    "[Ring2]",    "[Branch1]", "[=Branch1]", "[#Branch1]",
    "[Branch2]",  "[=Branch2]", "[#Branch2]", "[O]",       "[N]",        "[=N]",
    "[=C]",       "[#C]",       "[S]",        "[P]"};

int index_value(const std::string& token) {
  for (std::size_t i = 0; i < kIndexAlphabet.size(); ++i)
    if (kIndexAlphabet[i] == token) return static_cast<int>(i);
  return 0;
}

struct AtomTok {
  int bond_order = 1;  // requested attachment order
  std::string element;
  int explicit_h = -1;  // -1: free valence filling
  int charge = 0;
};

struct OperatorTok {
  enum Kind { Branch, Ring } kind;
  int operands;  // number of index tokens consumed
};

// Parses "[...]" bodies. Returns nothing for tokens that are not atoms.
std::optional<AtomTok> parse_atom_token(const std::string& tok) {
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return std::nullopt;
  std::string body = tok.substr(1, tok.size() - 2);
  AtomTok a;
  if (!body.empty() && body[0] == '=') {
    a.bond_order = 2;
    body.erase(0, 1);
  } else if (!body.empty() && body[0] == '#') {
    a.bond_order = 3;
    body.erase(0, 1);
  }
  if (body.empty() || !std::isupper(static_cast<unsigned char>(body[0]))) return std::nullopt;
  std::size_t i = 1;
  a.element = body.substr(0, 1);
  if (i < body.size() && std::islower(static_cast<unsigned char>(body[i]))) {
    a.element += body[i];
    ++i;
  }
  if (!chem::element_supported(a.element)) return std::nullopt;
  if (i < body.size() && body[i] == 'H') {
    ++i;
    int h = 1;
    if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
      h = body[i] - '0';
      ++i;
    }
    a.explicit_h = h;
  }
  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    const int sign = body[i] == '+' ? 1 : -1;
    ++i;
    int mag = 1;
    if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
      mag = body[i] - '0';
      ++i;
    }
    if (mag > 1) return std::nullopt;  // charge beyond +-1 excluded from the subset
    a.charge = sign * mag;
  }
  if (i != body.size()) return std::nullopt;
  return a;
}

std::optional<OperatorTok> parse_operator_token(const std::string& tok) {
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return std::nullopt;
  std::string body = tok.substr(1, tok.size() - 2);
  if (!body.empty() && (body[0] == '=' || body[0] == '#')) body.erase(0, 1);
  if (body.size() == 7 && body.rfind("Branch", 0) == 0 && body[6] >= '1' && body[6] <= '3')
    return OperatorTok{OperatorTok::Branch, body[6] - '0'};
  if (body.size() == 5 && body.rfind("Ring", 0) == 0 && body[4] >= '1' && body[4] <= '3')
    return OperatorTok{OperatorTok::Ring, body[4] - '0'};
  return std::nullopt;
}

int ring_bond_order(const std::string& tok) {
  if (tok.size() > 1 && tok[1] == '=') return 2;
  if (tok.size() > 1 && tok[1] == '#') return 3;
  return 1;
}

struct Deriver {
  chem::Molecule mol;
  std::vector<int> remain;  // remaining bonding capacity per atom

  int capacity(const AtomTok& a) const {
    int cap = chem::max_valence(a.element, a.charge);
    if (a.explicit_h >= 0) cap -= std::min(a.explicit_h, cap);
    return std::max(cap, 0);
  }

  int add_atom(const AtomTok& a, int attach_to, int order) {
    chem::Atom atom;
    atom.element = a.element;
    atom.formal_charge = a.charge;
    if (a.explicit_h >= 0) {
      atom.bracket = true;
      atom.explicit_h = std::min(a.explicit_h, chem::max_valence(a.element, a.charge));
    } else if (a.charge != 0) {
      atom.bracket = true;  // charged atoms keep zero fixed hydrogens
    }
    atom.index = static_cast<int>(mol.atoms.size());
    mol.atoms.push_back(atom);
    remain.push_back(capacity(a));
    if (attach_to >= 0 && order > 0) {
      mol.bonds.push_back({attach_to, atom.index, static_cast<chem::BondOrder>(order)});
      remain[attach_to] -= order;
      remain[atom.index] -= order;
    }
    return atom.index;
  }

  int read_index(const std::vector<std::string>& toks, std::size_t& i, std::size_t end,
                 int count) {
    int q = 0;
    for (int k = 0; k < count; ++k) {
      q *= 16;
      if (i < end) q += index_value(toks[i++]);
    }
    return q;
  }

  // Derives tokens [i, end) attached to `attach`; returns when the segment is
  // consumed or the chain runs out of capacity.
  void derive(const std::vector<std::string>& toks, std::size_t& i, std::size_t end,
              int attach) {
    int cur = attach;
    while (i < end) {
      const std::string tok = toks[i];
      if (auto at = parse_atom_token(tok)) {
        ++i;
        if (cur < 0) {
          cur = add_atom(*at, -1, 0);
          continue;
        }
        const int order = std::min({at->bond_order, remain[cur], capacity(*at)});
        if (order <= 0) return;  // chain saturated, rest of the segment is inert
        cur = add_atom(*at, cur, order);
        continue;
      }
      if (auto op = parse_operator_token(tok)) {
        ++i;
        if (op->kind == OperatorTok::Branch) {
          const int q = read_index(toks, i, end, op->operands);
          const std::size_t len = static_cast<std::size_t>(q) + 1;
          const std::size_t bend = std::min(i + len, end);
          if (cur < 0 || remain[cur] < 2) {
            i = bend;  // operator cannot act; operands and body are skipped
            continue;
          }
          derive(toks, i, bend, cur);
          i = bend;
        } else {
          const int q = read_index(toks, i, end, op->operands);
          if (cur < 0) continue;
          int target = cur - (q + 1);
          if (target < 0) target = 0;
          if (target == cur || mol.has_bond(target, cur)) continue;
          const int order =
              std::min({ring_bond_order(tok), remain[cur], remain[target]});
          if (order <= 0) continue;
          mol.bonds.push_back({target, cur, static_cast<chem::BondOrder>(order)});
          remain[cur] -= order;
          remain[target] -= order;
        }
        continue;
      }
      ++i;  // unknown token: skipped, derivation is total
    }
  }
};

}  // namespace

chem::Molecule decode_selfies(const std::vector<std::string>& tokens) {
  Deriver d;
  std::size_t i = 0;
  d.derive(tokens, i, tokens.size(), -1);
  auto err = chem::sanitize(d.mol);
  if (err) throw std::logic_error("selfies decoder produced unsanitizable molecule: " + *err);
  return d.mol;
}

chem::Molecule decode_selfies(const TokenSequence& s, const Vocabulary& v) {
  std::vector<std::string> toks;
  for (int id : s.ids)
    if (id > Vocabulary::kPad) toks.push_back(v.token(id));
  return decode_selfies(toks);
}

namespace {

std::string atom_token(const chem::Atom& a, int bond_order) {
  std::string s = "[";
  if (bond_order == 2) s += "=";
  if (bond_order == 3) s += "#";
  s += a.element;
  if (a.bracket) {
    const int h = a.total_h();
    if (h > 0) s += (h == 1) ? "H" : "H" + std::to_string(h);
    else s += "H0";
  }
  if (a.formal_charge == 1) s += "+1";
  if (a.formal_charge == -1) s += "-1";
  return s + "]";
}

std::vector<std::string> encode_index(int q, int operands) {
  std::vector<std::string> out;
  for (int k = operands - 1; k >= 0; --k)
    out.push_back(kIndexAlphabet[(q >> (4 * k)) & 0xF]);
  return out;
}

struct Encoder {
  const chem::Molecule& m;
  std::vector<std::vector<std::pair<int, chem::BondOrder>>> adj;
  std::vector<int> pos;  // derivation order position, -1 if unvisited
  int next_pos = 0;
  std::set<std::pair<int, int>> ring_edges;
  std::string error;

  explicit Encoder(const chem::Molecule& mol)
      : m(mol), adj(mol.adjacency()), pos(mol.atoms.size(), -1) {}

  void find_rings(int a, int parent) {
    pos[a] = 1;  // visited marker for this pass
    int par = parent;
    for (const auto& [b, order] : adj[a]) {
      if (b == par) { par = -1; continue; }
      if (pos[b] >= 0) {
        auto e = std::minmax(a, b);
        ring_edges.insert({e.first, e.second});
      } else {
        find_rings(b, a);
      }
    }
  }

  bool emit(int a, int bond_order, std::vector<std::string>& out) {
    const chem::Atom& atom = m.atoms[a];
    if (!chem::element_supported(atom.element)) {
      error = "unsupported element " + atom.element;
      return false;
    }
    if (std::abs(atom.formal_charge) > 1) {
      error = "charge beyond +-1 on " + atom.element;
      return false;
    }
    pos[a] = next_pos++;
    out.push_back(atom_token(atom, bond_order));
    // ring closures back to already-derived atoms
    for (const auto& [b, order] : adj[a]) {
      auto e = std::minmax(a, b);
      if (!ring_edges.count({e.first, e.second}) || pos[b] < 0 || pos[b] == pos[a]) continue;
      if (pos[b] > pos[a]) continue;  // the other endpoint closes it later
      const int jump = pos[a] - pos[b];
      const int q = jump - 1;
      std::string ring = "[";
      if (order == chem::BondOrder::Double) ring += "=";
      if (order == chem::BondOrder::Triple) ring += "#";
      const int operands = q < 16 ? 1 : 2;
      ring += "Ring" + std::to_string(operands) + "]";
      out.push_back(ring);
      for (auto& t : encode_index(q, operands)) out.push_back(t);
    }
    std::vector<std::pair<int, chem::BondOrder>> children;
    for (const auto& [b, order] : adj[a]) {
      auto e = std::minmax(a, b);
      if (ring_edges.count({e.first, e.second})) continue;
      if (pos[b] >= 0) continue;  // parent or already derived
      children.emplace_back(b, order);
    }
    for (std::size_t i = 0; i < children.size(); ++i) {
      const bool last = (i + 1 == children.size());
      if (last) {
        if (!emit(children[i].first, static_cast<int>(children[i].second), out)) return false;
      } else {
        std::vector<std::string> branch;
        if (!emit(children[i].first, static_cast<int>(children[i].second), branch)) return false;
        const int q = static_cast<int>(branch.size()) - 1;
        const int operands = q < 16 ? 1 : 2;
        out.push_back("[Branch" + std::to_string(operands) + "]");
        for (auto& t : encode_index(q, operands)) out.push_back(t);
        out.insert(out.end(), branch.begin(), branch.end());
      }
    }
    return true;
  }
};

}  // namespace

SelfiesEncodeResult encode_selfies(const chem::Molecule& m) {
  SelfiesEncodeResult res;
  if (m.atoms.empty()) {
    res.tokens = std::vector<std::string>{};
    return res;
  }
  Encoder ring_pass(m);
  ring_pass.find_rings(0, -1);
  Encoder enc(m);
  enc.ring_edges = ring_pass.ring_edges;
  std::vector<std::string> out;
  if (!enc.emit(0, 0, out)) {
    res.message = enc.error;
    return res;
  }
  res.tokens = std::move(out);
  return res;
}

std::vector<std::string> selfies_alphabet() {
  std::vector<std::string> out;
  const std::vector<std::string> elems = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "Si"};
  for (const auto& e : elems) {
    out.push_back("[" + e + "]");
    if (e != "F" && e != "Cl" && e != "Br" && e != "I") {
      out.push_back("[=" + e + "]");
      if (e != "O" && e != "S") out.push_back("[#" + e + "]");
    }
  }
  for (const char* t : {"[Ring1]", "[Ring2]", "[=Ring1]", "[Branch1]", "[=Branch1]",
                        "[#Branch1]", "[Branch2]", "[=Branch2]", "[#Branch2]"})
    out.push_back(t);
  return out;
}

chem::ParseResult sequence_to_molecule(const TokenSequence& s, const Vocabulary& v) {
  if (v.grammar() == Grammar::Smiles) return chem::parse_smiles(untokenize(s, v));
  chem::ParseResult res;
  res.mol = decode_selfies(s, v);
  return res;
}

}  // namespace molrl::grammar
