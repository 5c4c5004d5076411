#include "molrl/fingerprint.hpp"

#include <algorithm>
#include <stdexcept>

#include "molrl/rng.hpp"

namespace molrl::fp {

namespace {
constexpr std::uint64_t kSeed = 0x4d6f7267616e4650ULL;  // pinned across versions

std::uint64_t atom_invariant(const chem::Molecule& m, const chem::Atom& a) {
  std::uint64_t h = kSeed;
  for (char c : a.element) h = hash_combine(h, static_cast<std::uint64_t>(c));
  h = hash_combine(h, static_cast<std::uint64_t>(m.degree(a.index)));
  h = hash_combine(h, static_cast<std::uint64_t>(a.formal_charge + 16));
  h = hash_combine(h, static_cast<std::uint64_t>(a.total_h()));
  h = hash_combine(h, static_cast<std::uint64_t>(m.bond_order_sum(a.index)));
  return h;
}
}  // namespace

Fingerprint fingerprint(const chem::Molecule& m, int radius, int bit_size) {
  Fingerprint fpr;
  fpr.radius = radius;
  fpr.bit_size = bit_size;
  const auto adj = m.adjacency();
  std::vector<std::uint64_t> inv(m.atoms.size());
  for (std::size_t i = 0; i < m.atoms.size(); ++i) inv[i] = atom_invariant(m, m.atoms[i]);
  for (int r = 0; r <= radius; ++r) {
    for (std::uint64_t h : inv)
      fpr.set_bits.insert(static_cast<int>(h % static_cast<std::uint64_t>(bit_size)));
    if (r == radius) break;
    std::vector<std::uint64_t> next(inv.size());
    for (std::size_t i = 0; i < inv.size(); ++i) {
      std::vector<std::uint64_t> nb;
      for (const auto& [j, order] : adj[i])
        nb.push_back(hash_combine(static_cast<std::uint64_t>(order), inv[j]));
      std::sort(nb.begin(), nb.end());
      std::uint64_t h = hash_combine(inv[i], static_cast<std::uint64_t>(r + 1));
      for (auto x : nb) h = hash_combine(h, x);
      next[i] = h;
    }
    inv = std::move(next);
  }
  return fpr;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.bit_size != b.bit_size)
    throw std::invalid_argument("tanimoto: fingerprint bit sizes differ");
  if (a.set_bits.empty() && b.set_bits.empty()) return 1.0;
  std::size_t inter = 0;
  for (int bit : a.set_bits) inter += b.set_bits.count(bit);
  const std::size_t uni = a.set_bits.size() + b.set_bits.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double diversity(const std::vector<Fingerprint>& fps) {
  if (fps.empty()) throw std::invalid_argument("diversity: empty molecule set");
  if (fps.size() == 1) return 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < fps.size(); ++i)
    for (std::size_t j = i + 1; j < fps.size(); ++j) {
      sum += 1.0 - tanimoto(fps[i], fps[j]);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

}  // namespace molrl::fp
