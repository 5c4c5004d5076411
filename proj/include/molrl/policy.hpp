#ifndef MOLRL_POLICY_HPP
#define MOLRL_POLICY_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "molrl/grammar.hpp"
#include "molrl/rng.hpp"
#include "molrl/tensor.hpp"

namespace molrl::policy {

enum class Arch { Fc, Rnn, Transformer };

const char* arch_name(Arch a);
std::optional<Arch> arch_from_name(const std::string& name);

struct PolicyConfig {
  Arch arch = Arch::Rnn;
  int layers = 3;
  int hidden = 512;   // FC/GRU width
  int heads = 16;     // transformer
  int embed = 128;
  int horizon = 100;  // max sampled tokens per sequence, EOS included

  // full-scale defaults: FC 3x1024, GRU 3x512, transformer 6 layers /
  // 16 heads / 256 dims
  static PolicyConfig preset_default(Arch a);
  // desk-scale preset for tests: 2 layers, 64-dim
  static PolicyConfig preset_tiny(Arch a);
};

struct Rollout {
  grammar::TokenSequence seq;
  std::vector<double> step_logps;  // one per sampled token
  double total_logp = 0.0;         // == sum of step_logps
  std::optional<chem::Molecule> mol;
  std::string canonical;  // empty when invalid
  double reward = 0.0;
};

// Autoregressive next-token policy over a token vocabulary. One parameter
// set serves three interchangeable architectures:
//   FC          — prefix padded with [PAD] to the horizon, flattened
//                 embeddings, tanh MLP
//   RNN         — stacked GRU
//   Transformer — GPT-style: learned positional embeddings, pre-norm
//                 blocks, causal attention masking
class Policy {
 public:
  Policy(PolicyConfig cfg, grammar::Vocabulary vocab, std::uint64_t seed);

  const PolicyConfig& config() const { return cfg_; }
  const grammar::Vocabulary& vocab() const { return vocab_; }
  std::vector<nc::Tensor>& parameters() { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }

  // Differentiable forward over a whole sequence: row t of the result holds
  // the logits for the token following ids[0..t]. ids must start with [BOS].
  nc::Tensor logits_all_positions(const std::vector<int>& ids);

  // Numeric next-token logits for a prefix (no gradients, detached pass).
  std::vector<double> next_token_logits(const grammar::TokenSequence& prefix);

  // Multinomial sampling from the softmax at temperature 1; stops at [EOS]
  // or after `horizon` tokens. [PAD] is never sampled. Deterministic per rng
  // state. The decoded molecule is not filled in here.
  Rollout sample(Rng& rng);
  Rollout sample_with_seed(std::uint64_t seed);

  // Differentiable log pi(s): sum of log conditional probabilities of each
  // token after [BOS]. Scalar tensor <= 0.
  nc::Tensor sequence_log_prob(const grammar::TokenSequence& s);

  // Sum over the sequence's prefixes of KL(this || ref) between full
  // next-token distributions. Differentiable wrt this policy only.
  nc::Tensor kl_to_reference(Policy& ref, const grammar::TokenSequence& s);

  // Mean next-token cross-entropy over a batch of sequences with [PAD]
  // positions masked out of the average. Differentiable.
  nc::Tensor batch_cross_entropy(const std::vector<std::vector<int>>& sequences);

  void save(const std::string& path, std::map<std::string, std::string> extra_meta = {}) const;
  static Policy load(const std::string& path);

  // Copies parameter values from another policy of identical shape.
  void copy_parameters_from(const Policy& other);

 private:
  struct Detached;  // sampling-time parameter snapshot

  nc::Tensor forward(const std::vector<int>& ids, const std::vector<nc::Tensor>& p);
  nc::Tensor param(const std::string& name) const;
  std::vector<nc::Tensor> detached_params() const;

  PolicyConfig cfg_;
  grammar::Vocabulary vocab_;
  std::vector<nc::Tensor> params_;
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace molrl::policy

#endif
