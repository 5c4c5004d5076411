#include "molrl/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "molrl/checkpoint.hpp"

namespace molrl::policy {

using grammar::TokenSequence;
using grammar::Vocabulary;
using nc::Tensor;

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::Fc: return "fc";
    case Arch::Rnn: return "rnn";
    case Arch::Transformer: return "transformer";
  }
  return "?";
}

std::optional<Arch> arch_from_name(const std::string& name) {
  if (name == "fc") return Arch::Fc;
  if (name == "rnn") return Arch::Rnn;
  if (name == "transformer") return Arch::Transformer;
  return std::nullopt;
}

PolicyConfig PolicyConfig::preset_default(Arch a) {
  PolicyConfig c;
  c.arch = a;
  switch (a) {
    case Arch::Fc:
      c.layers = 3;
      c.hidden = 1024;
      c.embed = 64;
      break;
    case Arch::Rnn:
      c.layers = 3;
      c.hidden = 512;
      c.embed = 128;
      break;
    case Arch::Transformer:
      c.layers = 6;
      c.heads = 16;
      c.embed = 256;
      c.hidden = 256;
      break;
  }
  return c;
}

PolicyConfig PolicyConfig::preset_tiny(Arch a) {
  PolicyConfig c;
  c.arch = a;
  c.layers = 2;
  c.hidden = 64;
  c.embed = 64;
  c.heads = 4;
  c.horizon = 24;
  return c;
}

namespace {

constexpr double kInitStd = 0.02;
constexpr double kNegInf = -1e30;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor::from_values(std::move(shape), std::move(v), true);
}

}  // namespace

Policy::Policy(PolicyConfig cfg, Vocabulary vocab, std::uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  const std::size_t V = static_cast<std::size_t>(vocab_.size());
  const std::size_t E = static_cast<std::size_t>(cfg_.embed);
  const std::size_t Hd = static_cast<std::size_t>(cfg_.hidden);
  Rng rng(mix64(seed ^ 0x506f6c696379ULL));

  auto add_param = [&](const std::string& name, Tensor t) {
    index_[name] = params_.size();
    names_.push_back(name);
    params_.push_back(std::move(t));
  };
  auto randn = [&](const std::string& name, std::vector<std::size_t> shape) {
    add_param(name, random_tensor(std::move(shape), rng));
  };
  auto zeros = [&](const std::string& name, std::vector<std::size_t> shape) {
    add_param(name, Tensor::zeros(std::move(shape), true));
  };
  auto ones = [&](const std::string& name, std::vector<std::size_t> shape) {
    add_param(name, Tensor::full(std::move(shape), 1.0, true));
  };

  randn("embed", {V, E});
  switch (cfg_.arch) {
    case Arch::Fc: {
      std::size_t in = static_cast<std::size_t>(cfg_.horizon) * E;
      for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "fc" + std::to_string(l);
        randn(p + ".W", {in, Hd});
        zeros(p + ".b", {1, Hd});
        in = Hd;
      }
      randn("head.W", {Hd, V});
      zeros("head.b", {1, V});
      break;
    }
    case Arch::Rnn: {
      std::size_t in = E;
      for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "gru" + std::to_string(l);
        for (const char* g : {"z", "r", "n"}) {
          randn(p + ".W" + g, {in, Hd});
          randn(p + ".U" + g, {Hd, Hd});
          zeros(p + ".b" + std::string(g), {1, Hd});
        }
        in = Hd;
      }
      randn("head.W", {Hd, V});
      zeros("head.b", {1, V});
      break;
    }
    case Arch::Transformer: {
      if (E % static_cast<std::size_t>(cfg_.heads) != 0)
        throw std::invalid_argument("transformer embed dim must be divisible by heads");
      randn("pos", {static_cast<std::size_t>(cfg_.horizon) + 1, E});
      for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "tf" + std::to_string(l);
        ones(p + ".ln1.g", {1, E});
        zeros(p + ".ln1.b", {1, E});
        for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) randn(p + "." + w, {E, E});
        ones(p + ".ln2.g", {1, E});
        zeros(p + ".ln2.b", {1, E});
        randn(p + ".mlp.W1", {E, 4 * E});
        zeros(p + ".mlp.b1", {1, 4 * E});
        randn(p + ".mlp.W2", {4 * E, E});
        zeros(p + ".mlp.b2", {1, E});
      }
      ones("lnf.g", {1, E});
      zeros("lnf.b", {1, E});
      randn("head.W", {E, V});
      zeros("head.b", {1, V});
      break;
    }
  }
}

Tensor Policy::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("no such parameter: " + name);
  return params_[it->second];
}

std::vector<Tensor> Policy::detached_params() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(nc::detach(p));
  return out;
}

Tensor Policy::forward(const std::vector<int>& ids, const std::vector<Tensor>& p) {
  if (ids.empty() || ids[0] != Vocabulary::kBos)
    throw std::invalid_argument("policy input must start with [BOS]");
  for (int id : ids)
    if (id < 0 || id >= vocab_.size())
      throw std::out_of_range("token id outside vocabulary: " + std::to_string(id));
  const std::size_t T = ids.size();
  const std::size_t E = static_cast<std::size_t>(cfg_.embed);
  const std::size_t H = static_cast<std::size_t>(cfg_.horizon);
  auto P = [&](const std::string& name) { return p[index_.at(name)]; };

  switch (cfg_.arch) {
    case Arch::Fc: {
      if (T > H) throw std::invalid_argument("prefix longer than horizon");
      // every position sees its prefix padded with [PAD] out to the horizon
      std::vector<int> flat;
      flat.reserve(T * H);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i <= t; ++i) flat.push_back(ids[i]);
        for (std::size_t i = t + 1; i < H; ++i) flat.push_back(Vocabulary::kPad);
      }
      Tensor x = nc::reshape(nc::embedding(P("embed"), flat), {T, H * E});
      for (int l = 0; l < cfg_.layers; ++l) {
        const std::string pre = "fc" + std::to_string(l);
        x = nc::tanh_t(nc::add(nc::matmul(x, P(pre + ".W")), P(pre + ".b")));
      }
      return nc::add(nc::matmul(x, P("head.W")), P("head.b"));
    }
    case Arch::Rnn: {
      Tensor x_all = nc::embedding(P("embed"), ids);
      std::vector<Tensor> h(cfg_.layers);
      for (int l = 0; l < cfg_.layers; ++l)
        h[l] = Tensor::zeros({1, static_cast<std::size_t>(cfg_.hidden)});
      std::vector<Tensor> outs;
      outs.reserve(T);
      for (std::size_t t = 0; t < T; ++t) {
        Tensor x = nc::slice_rows(x_all, t, t + 1);
        for (int l = 0; l < cfg_.layers; ++l) {
          const std::string pre = "gru" + std::to_string(l);
          Tensor z = nc::sigmoid(nc::add(
              nc::add(nc::matmul(x, P(pre + ".Wz")), nc::matmul(h[l], P(pre + ".Uz"))),
              P(pre + ".bz")));
          Tensor r = nc::sigmoid(nc::add(
              nc::add(nc::matmul(x, P(pre + ".Wr")), nc::matmul(h[l], P(pre + ".Ur"))),
              P(pre + ".br")));
          Tensor n = nc::tanh_t(nc::add(
              nc::add(nc::matmul(x, P(pre + ".Wn")),
                      nc::mul(r, nc::matmul(h[l], P(pre + ".Un")))),
              P(pre + ".bn")));
          h[l] = nc::add(n, nc::mul(z, nc::sub(h[l], n)));
          x = h[l];
        }
        outs.push_back(x);
      }
      return nc::add(nc::matmul(nc::concat_rows(outs), P("head.W")), P("head.b"));
    }
    case Arch::Transformer: {
      if (T > H + 1) throw std::invalid_argument("prefix longer than horizon");
      const std::size_t nh = static_cast<std::size_t>(cfg_.heads);
      const std::size_t dh = E / nh;
      Tensor x = nc::add(nc::embedding(P("embed"), ids), nc::slice_rows(P("pos"), 0, T));
      // additive causal mask: -inf above the diagonal
      std::vector<double> mv(T * T, 0.0);
      for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = i + 1; j < T; ++j) mv[i * T + j] = kNegInf;
      Tensor mask = Tensor::from_values({T, T}, std::move(mv));
      for (int l = 0; l < cfg_.layers; ++l) {
        const std::string pre = "tf" + std::to_string(l);
        Tensor xn = nc::layer_norm_rows(x, P(pre + ".ln1.g"), P(pre + ".ln1.b"));
        Tensor q = nc::matmul(xn, P(pre + ".Wq"));
        Tensor k = nc::matmul(xn, P(pre + ".Wk"));
        Tensor v = nc::matmul(xn, P(pre + ".Wv"));
        std::vector<Tensor> heads;
        heads.reserve(nh);
        for (std::size_t hI = 0; hI < nh; ++hI) {
          Tensor qh = nc::slice_cols(q, hI * dh, (hI + 1) * dh);
          Tensor kh = nc::slice_cols(k, hI * dh, (hI + 1) * dh);
          Tensor vh = nc::slice_cols(v, hI * dh, (hI + 1) * dh);
          Tensor scores = nc::scale(nc::matmul(qh, nc::transpose(kh)),
                                    1.0 / std::sqrt(static_cast<double>(dh)));
          Tensor attn = nc::softmax_rows(nc::add(scores, mask));
          heads.push_back(nc::matmul(attn, vh));
        }
        x = nc::add(x, nc::matmul(nc::concat_cols(heads), P(pre + ".Wo")));
        Tensor xn2 = nc::layer_norm_rows(x, P(pre + ".ln2.g"), P(pre + ".ln2.b"));
        Tensor hmid = nc::add(nc::matmul(xn2, P(pre + ".mlp.W1")), P(pre + ".mlp.b1"));
        Tensor act = nc::mul(hmid, nc::sigmoid(hmid));  // SiLU
        x = nc::add(x, nc::add(nc::matmul(act, P(pre + ".mlp.W2")), P(pre + ".mlp.b2")));
      }
      Tensor xf = nc::layer_norm_rows(x, P("lnf.g"), P("lnf.b"));
      return nc::add(nc::matmul(xf, P("head.W")), P("head.b"));
    }
  }
  throw std::logic_error("unreachable");
}

Tensor Policy::logits_all_positions(const std::vector<int>& ids) {
  return forward(ids, params_);
}

namespace {

// [PAD] is not an action: force its probability to zero everywhere the
// distribution is formed.
Tensor mask_pad(const Tensor& logits) {
  std::vector<double> row(logits.cols(), 0.0);
  row[Vocabulary::kPad] = kNegInf;
  return nc::add(logits, Tensor::from_values({1, logits.cols()}, std::move(row)));
}

}  // namespace

std::vector<double> Policy::next_token_logits(const TokenSequence& prefix) {
  auto dp = detached_params();
  Tensor logits = forward(prefix.ids, dp);
  const std::size_t last = logits.rows() - 1;
  std::vector<double> out(logits.cols());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = logits.at(last, c);
  return out;
}

Rollout Policy::sample(Rng& rng) {
  auto dp = detached_params();
  Rollout out;
  out.seq.ids = {Vocabulary::kBos};

  // incremental GRU state; the other architectures recompute from the prefix
  std::vector<Tensor> h;
  if (cfg_.arch == Arch::Rnn)
    h.assign(cfg_.layers, Tensor::zeros({1, static_cast<std::size_t>(cfg_.hidden)}));
  auto P = [&](const std::string& name) { return dp[index_.at(name)]; };

  for (int step = 0; step < cfg_.horizon; ++step) {
    std::vector<double> logits;
    if (cfg_.arch == Arch::Rnn) {
      Tensor x = nc::embedding(P("embed"), {out.seq.ids.back()});
      for (int l = 0; l < cfg_.layers; ++l) {
        const std::string pre = "gru" + std::to_string(l);
        Tensor z = nc::sigmoid(nc::add(
            nc::add(nc::matmul(x, P(pre + ".Wz")), nc::matmul(h[l], P(pre + ".Uz"))),
            P(pre + ".bz")));
        Tensor r = nc::sigmoid(nc::add(
            nc::add(nc::matmul(x, P(pre + ".Wr")), nc::matmul(h[l], P(pre + ".Ur"))),
            P(pre + ".br")));
        Tensor n = nc::tanh_t(nc::add(
            nc::add(nc::matmul(x, P(pre + ".Wn")),
                    nc::mul(r, nc::matmul(h[l], P(pre + ".Un")))),
            P(pre + ".bn")));
        h[l] = nc::add(n, nc::mul(z, nc::sub(h[l], n)));
        x = h[l];
      }
      Tensor lg = nc::add(nc::matmul(x, P("head.W")), P("head.b"));
      logits.assign(lg.values().begin(), lg.values().end());
    } else {
      Tensor lg = forward(out.seq.ids, dp);
      const std::size_t last = lg.rows() - 1;
      logits.resize(lg.cols());
      for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = lg.at(last, c);
    }

    logits[Vocabulary::kPad] = kNegInf;
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> probs(logits.size());
    double zsum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      probs[i] = std::exp(logits[i] - mx);
      zsum += probs[i];
    }
    const std::size_t pick = sample_index(rng, probs);
    out.seq.ids.push_back(static_cast<int>(pick));
    const double logp = std::log(probs[pick] / zsum);
    out.step_logps.push_back(logp);
    out.total_logp += logp;
    if (static_cast<int>(pick) == Vocabulary::kEos) {
      out.seq.terminated = true;
      break;
    }
  }
  return out;
}

Rollout Policy::sample_with_seed(std::uint64_t seed) {
  Rng rng(mix64(seed));
  return sample(rng);
}

Tensor Policy::sequence_log_prob(const TokenSequence& s) {
  if (s.ids.size() < 2) return Tensor::scalar(0.0);
  std::vector<int> inputs(s.ids.begin(), s.ids.end() - 1);
  Tensor lp = nc::log_softmax_rows(mask_pad(forward(inputs, params_)));
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  idx.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t)
    idx.emplace_back(t, static_cast<std::size_t>(s.ids[t + 1]));
  return nc::sum_all(nc::gather2d(lp, idx));
}

Tensor Policy::kl_to_reference(Policy& ref, const TokenSequence& s) {
  if (ref.vocab_.tokens() != vocab_.tokens())
    throw std::invalid_argument("KL requires a shared vocabulary");
  if (s.ids.size() < 2) return Tensor::scalar(0.0);
  std::vector<int> inputs(s.ids.begin(), s.ids.end() - 1);
  Tensor logits = mask_pad(forward(inputs, params_));
  Tensor p = nc::softmax_rows(logits);
  Tensor lp = nc::log_softmax_rows(logits);
  auto rdp = ref.detached_params();
  Tensor lq = nc::detach(nc::log_softmax_rows(mask_pad(ref.forward(inputs, rdp))));
  return nc::sum_all(nc::mul(p, nc::sub(lp, lq)));
}

Tensor Policy::batch_cross_entropy(const std::vector<std::vector<int>>& sequences) {
  if (sequences.empty()) throw std::invalid_argument("empty training batch");
  std::size_t longest = 0;
  for (const auto& s : sequences) longest = std::max(longest, s.size());
  std::vector<Tensor> parts;
  std::vector<int> targets;
  std::vector<bool> mask;
  for (const auto& s : sequences) {
    if (s.size() < 2) throw std::invalid_argument("sequence too short to train on");
    std::vector<int> padded = s;
    padded.resize(longest, Vocabulary::kPad);
    std::vector<int> inputs(padded.begin(), padded.end() - 1);
    parts.push_back(mask_pad(forward(inputs, params_)));
    for (std::size_t t = 1; t < padded.size(); ++t) {
      targets.push_back(padded[t]);
      mask.push_back(padded[t] != Vocabulary::kPad);
    }
  }
  return nc::cross_entropy_rows(nc::concat_rows(parts), targets, mask);
}

void Policy::save(const std::string& path, std::map<std::string, std::string> extra_meta) const {
  nc::Checkpoint ck;
  for (std::size_t i = 0; i < params_.size(); ++i) ck.params[names_[i]] = params_[i];
  ck.meta["kind"] = "policy";
  ck.meta["arch"] = arch_name(cfg_.arch);
  ck.meta["layers"] = std::to_string(cfg_.layers);
  ck.meta["hidden"] = std::to_string(cfg_.hidden);
  ck.meta["heads"] = std::to_string(cfg_.heads);
  ck.meta["embed"] = std::to_string(cfg_.embed);
  ck.meta["horizon"] = std::to_string(cfg_.horizon);
  ck.meta["grammar"] = grammar::grammar_name(vocab_.grammar());
  std::string toks;
  for (int i = 3; i < vocab_.size(); ++i) {
    if (!toks.empty()) toks += ' ';
    toks += vocab_.token(i);
  }
  ck.meta["vocab"] = toks;
  for (auto& [k, v] : extra_meta) ck.meta[k] = std::move(v);
  ck.save(path);
}

Policy Policy::load(const std::string& path) {
  nc::Checkpoint ck = nc::Checkpoint::load(path);
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw std::runtime_error("checkpoint missing meta: " + key);
    return it->second;
  };
  PolicyConfig cfg;
  auto arch = arch_from_name(need("arch"));
  if (!arch) throw std::runtime_error("unknown architecture: " + need("arch"));
  cfg.arch = *arch;
  cfg.layers = std::stoi(need("layers"));
  cfg.hidden = std::stoi(need("hidden"));
  cfg.heads = std::stoi(need("heads"));
  cfg.embed = std::stoi(need("embed"));
  cfg.horizon = std::stoi(need("horizon"));
  auto g = grammar::grammar_from_name(need("grammar"));
  if (!g) throw std::runtime_error("unknown grammar in checkpoint");
  std::vector<std::string> toks;
  std::string cur;
  for (char c : need("vocab")) {
    if (c == ' ') {
      if (!cur.empty()) toks.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) toks.push_back(cur);

  Policy p(cfg, Vocabulary(*g, toks), 0);
  for (std::size_t i = 0; i < p.params_.size(); ++i) {
    auto it = ck.params.find(p.names_[i]);
    if (it == ck.params.end())
      throw std::runtime_error("checkpoint missing parameter: " + p.names_[i]);
    if (it->second.shape() != p.params_[i].shape())
      throw std::runtime_error("checkpoint shape mismatch for " + p.names_[i]);
    p.params_[i].values() = it->second.values();
  }
  return p;
}

void Policy::copy_parameters_from(const Policy& other) {
  if (other.params_.size() != params_.size())
    throw std::invalid_argument("parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (other.params_[i].shape() != params_[i].shape())
      throw std::invalid_argument("parameter shape mismatch at " + names_[i]);
    params_[i].values() = other.params_[i].values();
  }
}

}  // namespace molrl::policy
