#ifndef MOLRL_PRETRAIN_HPP
#define MOLRL_PRETRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "molrl/grammar.hpp"
#include "molrl/optim.hpp"
#include "molrl/policy.hpp"

namespace molrl::pretrain {

struct FilterConfig {
  int min_heavy = 10;
  int max_heavy = 50;
  std::vector<std::string> allowed_elements = {"C", "N", "O", "F", "Si", "Cl", "Br"};
};

struct CorpusStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t dropped_parse = 0;
  std::size_t dropped_heavy = 0;
  std::size_t dropped_element = 0;
  std::size_t dropped_fragment = 0;
  int vocab_size = 0;

  std::size_t dropped() const {
    return dropped_parse + dropped_heavy + dropped_element + dropped_fragment;
  }
};

struct Corpus {
  grammar::Grammar grammar = grammar::Grammar::Smiles;
  std::vector<std::string> canonical;                  // kept molecules, input order
  std::vector<std::vector<std::string>> token_texts;   // per molecule
  grammar::Vocabulary vocabulary{grammar::Grammar::Smiles, {}};
  CorpusStats stats;
};

// Reads one molecule per line, applies the filters, canonicalizes, and
// re-tokenizes under the chosen grammar. Bad lines are counted and skipped;
// an unreadable file aborts. Output order follows the input.
Corpus ingest(const std::string& path, grammar::Grammar g, const FilterConfig& f = {});

void save_corpus(const Corpus& c, const std::string& smiles_path);
std::string stats_json(const CorpusStats& s);

// Token-id sequences ([BOS] ... [EOS]) under the corpus vocabulary.
std::vector<std::vector<int>> encode_corpus(const Corpus& c);

// Deterministic 5% validation split keyed by a hash of the canonical string.
bool is_validation(const std::string& canonical);

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double lr = 1e-3;
  nc::LrSchedule schedule = nc::LrSchedule::Cosine;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::string out_dir;  // when set: loss curve CSV + last/best checkpoints
};

struct PretrainResult {
  std::vector<double> train_loss;  // per epoch, mean per kept token
  std::vector<double> val_loss;
  double best_val = 0.0;
  int best_epoch = -1;
  std::size_t skipped_too_long = 0;  // sequences beyond the policy horizon
};

// Next-token-prediction training of the policy on the corpus. Throws on a
// non-finite loss. Bit-reproducible for a fixed seed on one thread.
PretrainResult run_pretraining(policy::Policy& p, const Corpus& corpus,
                               const PretrainConfig& cfg);

}  // namespace molrl::pretrain

#endif
