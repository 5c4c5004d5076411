#ifndef MOLRL_FINGERPRINT_HPP
#define MOLRL_FINGERPRINT_HPP

#include <cstdint>
#include <set>
#include <vector>

#include "molrl/molecule.hpp"

namespace molrl::fp {

// Circular (Morgan-style) fingerprint: atom invariants refined `radius`
// times, every (atom, r) environment hashed to one bit. The mixing hash is
// pinned so fingerprints are reproducible across builds; bit-exact parity
// with external toolkits is not claimed.
struct Fingerprint {
  int bit_size = 2048;
  int radius = 2;
  std::set<int> set_bits;
};

Fingerprint fingerprint(const chem::Molecule& m, int radius = 2, int bit_size = 2048);

// |A n B| / |A u B|; 1.0 when both sets are empty. Throws on bit_size mismatch.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// Mean pairwise (1 - tanimoto) over unordered pairs; 0 for a single molecule.
double diversity(const std::vector<Fingerprint>& fps);

}  // namespace molrl::fp

#endif
