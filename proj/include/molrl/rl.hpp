#ifndef MOLRL_RL_HPP
#define MOLRL_RL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "molrl/oracle.hpp"
#include "molrl/policy.hpp"
#include "molrl/rng.hpp"

namespace molrl::rl {

enum class BufferKind { None, HillClimb, Fifo };

const char* buffer_kind_name(BufferKind k);
std::optional<BufferKind> buffer_kind_from_name(const std::string& name);

struct BufferEntry {
  grammar::TokenSequence seq;
  std::string canonical;
  double reward = 0.0;
};

// Replay store for scored sequences.
//   HillClimb — the K best distinct canonical molecules seen so far; the
//               minimum stored reward never decreases. Reward ties evict the
//               oldest entry first.
//   Fifo      — the K most recently stored entries.
class ReplayBuffer {
 public:
  ReplayBuffer(BufferKind kind, std::size_t capacity);

  // Returns true when the entry was stored (or upgraded an existing
  // canonical duplicate to a higher reward).
  bool insert(BufferEntry e);

  // HillClimb: `count` entries sampled uniformly without replacement.
  // Fifo: the `count` most recently stored entries. Fewer when small.
  std::vector<BufferEntry> mix(std::size_t count, Rng& rng) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double min_reward() const;
  double max_reward() const;
  BufferKind kind() const { return kind_; }

 private:
  BufferKind kind_;
  std::size_t capacity_;
  std::uint64_t counter_ = 0;  // insertion order for tie-breaking
  struct Stored {
    BufferEntry e;
    std::uint64_t order;
  };
  std::vector<Stored> entries_;
};

struct RLConfig {
  int batch_size = 64;
  double lr = 5e-4;  // default for FC/RNN; 1e-4 for the transformer
  double logp_coef = 5.0;
  double kl_coef = 0.001;
  double ent_coef = 0.0;
  BufferKind buffer = BufferKind::HillClimb;
  std::size_t buffer_capacity = 500;
  std::size_t mix_count = 16;
  double logp_clamp = 1e3;  // cap on the -1/log pi term near pi -> 1
  bool use_baseline = false;  // optional EMA reward baseline, off by default
  double baseline_decay = 0.9;
  int max_steps = 0;  // 0: run until a budget is exhausted
  std::uint64_t seed = 0;
  std::string out_dir;  // when set: config snapshot, scored log, metrics, checkpoint

  std::string to_json() const;
  static RLConfig from_json(const std::string& text);
};

struct LossBreakdown {
  nc::Tensor loss;  // scalar, differentiable
  double reinforce = 0.0;
  double kl = 0.0;
  double logp_penalty = 0.0;
  double entropy = 0.0;
  int clamp_incidents = 0;
};

// Mean over rollouts of
//   -log pi(s) * r + kl_coef * KL(pi || prior) + logp_coef * (-1/log pi)
//   + ent_coef * log pi
// with each regularizer present only when its coefficient is positive. The
// -1/log pi term is capped at cfg.logp_clamp. `baseline` is subtracted from
// each reward when the EMA baseline is enabled.
LossBreakdown reinforce_loss(policy::Policy& p, const std::vector<policy::Rollout>& rollouts,
                             const RLConfig& cfg, policy::Policy* prior,
                             double baseline = 0.0);

struct TrainResult {
  int steps = 0;
  std::size_t scored = 0;
  double best_reward = 0.0;
  std::string best_canonical;
  int clamp_incidents = 0;
  std::vector<double> step_mean_reward;
};

// REINFORCE fine-tuning loop: sample a batch, decode, score through the
// ledger, mix in buffer entries (cached rewards, no budget cost), update.
// Stops when a budget is exhausted (mid-batch exhaustion truncates the batch
// and finishes cleanly) or after cfg.max_steps. Deterministic per seed on
// one thread.
TrainResult train(policy::Policy& p, policy::Policy* prior, oracle::Oracle& orc,
                  oracle::OracleLedger& ledger, const RLConfig& cfg);

}  // namespace molrl::rl

#endif
