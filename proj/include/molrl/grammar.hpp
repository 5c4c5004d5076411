#ifndef MOLRL_GRAMMAR_HPP
#define MOLRL_GRAMMAR_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "molrl/molecule.hpp"

namespace molrl::grammar {

enum class Grammar { Smiles, Selfies };

const char* grammar_name(Grammar g);
std::optional<Grammar> grammar_from_name(const std::string& name);

// Token ids are dense 0..N-1 with the specials first: [BOS]=0, [EOS]=1,
// [PAD]=2. [PAD] is never a sampleable action.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;

  Vocabulary(Grammar g, std::vector<std::string> chemical_tokens);

  Grammar grammar() const { return grammar_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(id); }
  std::optional<int> id_of(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  Grammar grammar_;
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;  // starts with [BOS]; ends with [EOS] when terminated
  bool terminated = false;

  std::size_t chemical_length() const {
    return ids.size() - 1 - (terminated ? 1 : 0);
  }
};

// Greedy longest-match tokenization; concatenating the matched token texts
// reproduces the input exactly.
struct TokenizeResult {
  std::optional<TokenSequence> seq;
  std::size_t error_pos = 0;
  std::string message;
  bool ok() const { return seq.has_value(); }
};

TokenizeResult tokenize_smiles(const std::string& text, const Vocabulary& v);

std::string untokenize(const TokenSequence& s, const Vocabulary& v);

// Splits a SMILES string into chemical token texts (no vocabulary needed);
// used when building a vocabulary from a corpus.
std::vector<std::string> split_smiles_tokens(const std::string& text);

// ---- SELFIES ----

// Derivation-rule decoder: total over the SELFIES vocabulary, every token
// stream yields a valid (possibly empty) molecule. Tokens that cannot act in
// the current derivation state are skipped.
chem::Molecule decode_selfies(const std::vector<std::string>& tokens);
chem::Molecule decode_selfies(const TokenSequence& s, const Vocabulary& v);

struct SelfiesEncodeResult {
  std::optional<std::vector<std::string>> tokens;
  std::string message;
  bool ok() const { return tokens.has_value(); }
};

SelfiesEncodeResult encode_selfies(const chem::Molecule& m);

// The full token set the encoder may emit for the supported element table,
// used to seed SELFIES vocabularies.
std::vector<std::string> selfies_alphabet();

// Route a finished sequence to a molecule under the vocabulary's grammar.
// SMILES may fail (invalid molecule, reward 0 downstream); SELFIES cannot.
chem::ParseResult sequence_to_molecule(const TokenSequence& s, const Vocabulary& v);

}  // namespace molrl::grammar

#endif
