#include "molrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "molrl/optim.hpp"

namespace molrl::rl {

using nlohmann::json;
using policy::Rollout;

const char* buffer_kind_name(BufferKind k) {
  switch (k) {
    case BufferKind::None: return "none";
    case BufferKind::HillClimb: return "hill_climb";
    case BufferKind::Fifo: return "fifo";
  }
  return "?";
}

std::optional<BufferKind> buffer_kind_from_name(const std::string& name) {
  if (name == "none") return BufferKind::None;
  if (name == "hill_climb") return BufferKind::HillClimb;
  if (name == "fifo") return BufferKind::Fifo;
  return std::nullopt;
}

ReplayBuffer::ReplayBuffer(BufferKind kind, std::size_t capacity)
    : kind_(kind), capacity_(capacity) {
  if (capacity == 0 && kind != BufferKind::None)
    throw std::invalid_argument("replay buffer needs a positive capacity");
}

bool ReplayBuffer::insert(BufferEntry e) {
  if (kind_ == BufferKind::None) return false;

  if (kind_ == BufferKind::Fifo) {
    entries_.push_back({std::move(e), counter_++});
    if (entries_.size() > capacity_) entries_.erase(entries_.begin());
    return true;
  }

  // hill-climb: distinct canonical molecules, top-K by reward
  for (auto& s : entries_) {
    if (s.e.canonical == e.canonical) {
      if (e.reward > s.e.reward) {
        s.e = std::move(e);
        s.order = counter_++;
        return true;
      }
      return false;
    }
  }
  if (entries_.size() < capacity_) {
    entries_.push_back({std::move(e), counter_++});
    return true;
  }
  std::size_t worst = 0;
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = entries_[worst];
    if (a.e.reward < b.e.reward ||
        (a.e.reward == b.e.reward && a.order < b.order))
      worst = i;
  }
  if (e.reward <= entries_[worst].e.reward) return false;
  entries_[worst] = {std::move(e), counter_++};
  return true;
}

std::vector<BufferEntry> ReplayBuffer::mix(std::size_t count, Rng& rng) const {
  std::vector<BufferEntry> out;
  if (entries_.empty() || count == 0) return out;

  if (kind_ == BufferKind::Fifo) {
    std::vector<const Stored*> sorted;
    for (const auto& s : entries_) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(),
              [](const Stored* a, const Stored* b) { return a->order > b->order; });
    for (std::size_t i = 0; i < std::min(count, sorted.size()); ++i)
      out.push_back(sorted[i]->e);
    return out;
  }

  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < std::min(count, idx.size()); ++i)
    out.push_back(entries_[idx[i]].e);
  return out;
}

double ReplayBuffer::min_reward() const {
  if (entries_.empty()) throw std::logic_error("empty buffer has no minimum");
  double m = entries_[0].e.reward;
  for (const auto& s : entries_) m = std::min(m, s.e.reward);
  return m;
}

double ReplayBuffer::max_reward() const {
  if (entries_.empty()) throw std::logic_error("empty buffer has no maximum");
  double m = entries_[0].e.reward;
  for (const auto& s : entries_) m = std::max(m, s.e.reward);
  return m;
}

std::string RLConfig::to_json() const {
  json j;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["logp_coef"] = logp_coef;
  j["kl_coef"] = kl_coef;
  j["ent_coef"] = ent_coef;
  j["buffer"] = buffer_kind_name(buffer);
  j["buffer_capacity"] = buffer_capacity;
  j["mix_count"] = mix_count;
  j["logp_clamp"] = logp_clamp;
  j["use_baseline"] = use_baseline;
  j["baseline_decay"] = baseline_decay;
  j["max_steps"] = max_steps;
  j["seed"] = seed;
  return j.dump(2);
}

RLConfig RLConfig::from_json(const std::string& text) {
  RLConfig c;
  const json parsed = json::parse(text);
  for (const auto& [key, val] : parsed.items()) {
    if (key == "batch_size") c.batch_size = val.get<int>();
    else if (key == "lr") c.lr = val.get<double>();
    else if (key == "logp_coef") c.logp_coef = val.get<double>();
    else if (key == "kl_coef") c.kl_coef = val.get<double>();
    else if (key == "ent_coef") c.ent_coef = val.get<double>();
    else if (key == "buffer") {
      auto k = buffer_kind_from_name(val.get<std::string>());
      if (!k) throw std::runtime_error("unknown buffer kind: " + val.get<std::string>());
      c.buffer = *k;
    } else if (key == "buffer_capacity") c.buffer_capacity = val.get<std::size_t>();
    else if (key == "mix_count") c.mix_count = val.get<std::size_t>();
    else if (key == "logp_clamp") c.logp_clamp = val.get<double>();
    else if (key == "use_baseline") c.use_baseline = val.get<bool>();
    else if (key == "baseline_decay") c.baseline_decay = val.get<double>();
    else if (key == "max_steps") c.max_steps = val.get<int>();
    else if (key == "seed") c.seed = val.get<std::uint64_t>();
    else if (key == "out_dir") c.out_dir = val.get<std::string>();
    else throw std::runtime_error("unknown rl config key: " + key);
  }
  if (c.logp_coef < 0 || c.kl_coef < 0 || c.ent_coef < 0)
    throw std::runtime_error("regularizer coefficients must be >= 0");
  return c;
}

LossBreakdown reinforce_loss(policy::Policy& p, const std::vector<Rollout>& rollouts,
                             const RLConfig& cfg, policy::Policy* prior, double baseline) {
  if (rollouts.empty()) throw std::invalid_argument("reinforce_loss needs rollouts");
  if (cfg.kl_coef > 0 && !prior)
    throw std::invalid_argument("kl_coef > 0 requires a reference policy");

  LossBreakdown out;
  std::vector<nc::Tensor> terms;
  for (const auto& r : rollouts) {
    nc::Tensor lp = p.sequence_log_prob(r.seq);
    nc::Tensor term = nc::scale(lp, -(r.reward - baseline));
    out.reinforce += term.item();
    if (cfg.kl_coef > 0) {
      nc::Tensor kl = nc::scale(p.kl_to_reference(*prior, r.seq), cfg.kl_coef);
      out.kl += kl.item();
      term = nc::add(term, kl);
    }
    if (cfg.logp_coef > 0) {
      nc::Tensor pen;
      if (lp.item() == 0.0) {
        // probability-1 sequence: -1/log pi is singular, use the cap
        pen = nc::Tensor::scalar(cfg.logp_clamp);
        ++out.clamp_incidents;
      } else {
        pen = nc::clamp_max(nc::scale(nc::reciprocal(lp), -1.0), cfg.logp_clamp);
        if (pen.item() >= cfg.logp_clamp) ++out.clamp_incidents;
      }
      pen = nc::scale(pen, cfg.logp_coef);
      out.logp_penalty += pen.item();
      term = nc::add(term, pen);
    }
    if (cfg.ent_coef > 0) {
      nc::Tensor ent = nc::scale(lp, cfg.ent_coef);
      out.entropy += ent.item();
      term = nc::add(term, ent);
    }
    terms.push_back(term);
  }
  const double inv = 1.0 / static_cast<double>(rollouts.size());
  out.loss = nc::scale(nc::concat_rows(terms), inv);
  out.loss = nc::sum_all(out.loss);
  out.reinforce *= inv;
  out.kl *= inv;
  out.logp_penalty *= inv;
  out.entropy *= inv;
  return out;
}

TrainResult train(policy::Policy& p, policy::Policy* prior, oracle::Oracle& orc,
                  oracle::OracleLedger& ledger, const RLConfig& cfg) {
  TrainResult res;
  Rng rng(mix64(cfg.seed ^ 0x726c2d656e67ULL));
  ReplayBuffer buffer(cfg.buffer == BufferKind::None ? BufferKind::None : cfg.buffer,
                      cfg.buffer == BufferKind::None ? 1 : cfg.buffer_capacity);

  nc::OptimConfig oc;
  oc.kind = nc::OptimKind::Adam;
  oc.lr = cfg.lr;
  oc.clip_norm = 5.0;
  nc::Optimizer opt(p.parameters(), oc);

  std::ofstream scored_log, metrics;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream(cfg.out_dir + "/rl_config.json") << cfg.to_json() << "\n";
    scored_log.open(cfg.out_dir + "/scored.tsv");
    metrics.open(cfg.out_dir + "/metrics.csv");
    metrics << "step,mean_reward,best_reward,buffer_min,buffer_size,loss,reinforce,kl,"
               "logp_penalty,unique_used,total_used,lr\n";
  }

  double baseline = 0.0;
  bool baseline_init = false;
  bool exhausted = ledger.exhausted();

  for (int step = 0; !exhausted && (cfg.max_steps == 0 || step < cfg.max_steps); ++step) {
    std::vector<Rollout> batch;
    for (int i = 0; i < cfg.batch_size && !exhausted; ++i) {
      Rollout r = p.sample(rng);
      auto parsed = grammar::sequence_to_molecule(r.seq, p.vocab());
      if (parsed.ok() && parsed.mol->atoms.empty()) parsed.mol.reset();  // empty: reward 0
      if (parsed.ok()) {
        r.mol = *parsed.mol;
        r.canonical = chem::canonical_form(*parsed.mol);
      }
      auto outcome = orc.score(r.mol ? &*r.mol : nullptr, ledger);
      exhausted = exhausted || outcome.exhausted;
      if (!r.mol) {
        r.reward = 0.0;  // invalid molecule: reward 0, no oracle budget
        batch.push_back(std::move(r));
        continue;
      }
      if (!outcome.scored) break;  // exhausted mid-batch: truncate here
      r.reward = outcome.score;
      ++res.scored;
      if (scored_log.is_open())
        scored_log << r.canonical << "\t" << r.reward << "\t" << step << "\n";
      if (r.reward > res.best_reward || res.best_canonical.empty()) {
        res.best_reward = r.reward;
        res.best_canonical = r.canonical;
      }
      if (cfg.buffer != BufferKind::None)
        buffer.insert({r.seq, r.canonical, r.reward});
      batch.push_back(std::move(r));
    }
    if (batch.empty()) break;

    double mean_r = 0.0;
    for (const auto& r : batch) mean_r += r.reward;
    mean_r /= static_cast<double>(batch.size());
    res.step_mean_reward.push_back(mean_r);

    // replayed entries reuse their cached rewards; no oracle calls here
    for (auto& e : buffer.mix(cfg.mix_count, rng)) {
      Rollout r;
      r.seq = e.seq;
      r.canonical = e.canonical;
      r.reward = e.reward;
      batch.push_back(std::move(r));
    }

    if (cfg.use_baseline) {
      baseline = baseline_init ? cfg.baseline_decay * baseline +
                                     (1 - cfg.baseline_decay) * mean_r
                               : mean_r;
      baseline_init = true;
    }

    auto lb = reinforce_loss(p, batch, cfg, prior, cfg.use_baseline ? baseline : 0.0);
    res.clamp_incidents += lb.clamp_incidents;
    if (!std::isfinite(lb.loss.item()))
      throw std::runtime_error("non-finite RL loss at step " + std::to_string(step));
    opt.zero_grad();
    nc::backward(lb.loss);
    opt.step();
    ++res.steps;

    if (metrics.is_open())
      metrics << step << "," << mean_r << "," << res.best_reward << ","
              << (buffer.empty() ? 0.0 : buffer.min_reward()) << "," << buffer.size()
              << "," << lb.loss.item() << "," << lb.reinforce << "," << lb.kl << ","
              << lb.logp_penalty << "," << ledger.unique_used() << ","
              << ledger.total_used() << "," << opt.current_lr() << "\n";
  }

  if (!cfg.out_dir.empty()) p.save(cfg.out_dir + "/model_final.json");
  return res;
}

}  // namespace molrl::rl
