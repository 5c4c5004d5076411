#include "molrl/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "molrl/rng.hpp"

namespace molrl::pretrain {

using grammar::Grammar;
using grammar::Vocabulary;

Corpus ingest(const std::string& path, Grammar g, const FilterConfig& f) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus: " + path);

  const std::set<std::string> allow(f.allowed_elements.begin(), f.allowed_elements.end());
  Corpus c;
  c.grammar = g;
  std::set<std::string> seen_tokens;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ++c.stats.total;
    if (line.find('.') != std::string::npos) {
      ++c.stats.dropped_fragment;
      continue;
    }
    auto r = chem::parse_smiles(line);
    if (!r.ok()) {
      ++c.stats.dropped_parse;
      continue;
    }
    const int heavy = chem::heavy_atom_count(*r.mol);
    if (heavy < f.min_heavy || heavy > f.max_heavy) {
      ++c.stats.dropped_heavy;
      continue;
    }
    bool ok = true;
    for (const auto& a : r.mol->atoms)
      if (!allow.count(a.element)) {
        ok = false;
        break;
      }
    if (!ok) {
      ++c.stats.dropped_element;
      continue;
    }

    const std::string canonical = chem::canonical_form(*r.mol);
    std::vector<std::string> toks;
    if (g == Grammar::Smiles) {
      toks = grammar::split_smiles_tokens(canonical);
    } else {
      auto enc = grammar::encode_selfies(*r.mol);
      if (!enc.ok()) {
        ++c.stats.dropped_parse;
        continue;
      }
      toks = *enc.tokens;
    }
    ++c.stats.kept;
    c.canonical.push_back(canonical);
    for (const auto& t : toks) seen_tokens.insert(t);
    c.token_texts.push_back(std::move(toks));
  }
  c.vocabulary =
      Vocabulary(g, std::vector<std::string>(seen_tokens.begin(), seen_tokens.end()));
  c.stats.vocab_size = c.vocabulary.size();
  return c;
}

void save_corpus(const Corpus& c, const std::string& smiles_path) {
  std::ofstream out(smiles_path);
  if (!out) throw std::runtime_error("cannot write corpus: " + smiles_path);
  for (const auto& s : c.canonical) out << s << "\n";
}

std::string stats_json(const CorpusStats& s) {
  nlohmann::json j;
  j["total"] = s.total;
  j["kept"] = s.kept;
  j["dropped"] = {{"parse", s.dropped_parse},
                  {"heavy_atom_range", s.dropped_heavy},
                  {"element_allow_list", s.dropped_element},
                  {"fragment", s.dropped_fragment}};
  j["vocab_size"] = s.vocab_size;
  return j.dump(2);
}

std::vector<std::vector<int>> encode_corpus(const Corpus& c) {
  std::vector<std::vector<int>> out;
  out.reserve(c.token_texts.size());
  for (const auto& toks : c.token_texts) {
    std::vector<int> ids = {Vocabulary::kBos};
    for (const auto& t : toks) {
      auto id = c.vocabulary.id_of(t);
      if (!id) throw std::logic_error("corpus token missing from its vocabulary: " + t);
      ids.push_back(*id);
    }
    ids.push_back(Vocabulary::kEos);
    out.push_back(std::move(ids));
  }
  return out;
}

bool is_validation(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a, then mixed
  for (unsigned char ch : canonical) h = (h ^ ch) * 1099511628211ULL;
  return mix64(h) % 20 == 0;  // 5%
}

namespace {

// mean loss per kept token over a set of sequences, evaluated in batches
double dataset_loss(policy::Policy& p, const std::vector<const std::vector<int>*>& seqs,
                    int batch_size) {
  double weighted = 0.0;
  std::size_t tokens = 0;
  for (std::size_t at = 0; at < seqs.size(); at += batch_size) {
    std::vector<std::vector<int>> batch;
    std::size_t batch_tokens = 0;
    for (std::size_t i = at; i < std::min(seqs.size(), at + batch_size); ++i) {
      batch.push_back(*seqs[i]);
      batch_tokens += seqs[i]->size() - 1;
    }
    weighted += p.batch_cross_entropy(batch).item() * batch_tokens;
    tokens += batch_tokens;
  }
  return tokens ? weighted / tokens : 0.0;
}

}  // namespace

PretrainResult run_pretraining(policy::Policy& p, const Corpus& corpus,
                               const PretrainConfig& cfg) {
  if (p.vocab().tokens() != corpus.vocabulary.tokens())
    throw std::invalid_argument("policy vocabulary does not match the corpus vocabulary");

  PretrainResult res;
  auto all = encode_corpus(corpus);
  std::vector<const std::vector<int>*> train, val;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (static_cast<int>(all[i].size()) - 1 > p.config().horizon) {
      ++res.skipped_too_long;
      continue;
    }
    (is_validation(corpus.canonical[i]) ? val : train).push_back(&all[i]);
  }
  if (train.empty() && val.empty())
    throw std::invalid_argument("no training sequences after filtering");
  // tiny corpora can hash entirely into one side; fall back to the other
  if (train.empty()) train = val;
  const auto& val_set = val.empty() ? train : val;

  const std::size_t steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  nc::OptimConfig oc;
  oc.kind = nc::OptimKind::Adam;
  oc.lr = cfg.lr;
  oc.schedule = cfg.schedule;
  oc.total_steps = steps_per_epoch * cfg.epochs;
  oc.clip_norm = cfg.clip_norm;
  nc::Optimizer opt(p.parameters(), oc);

  std::ofstream csv;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    csv.open(cfg.out_dir + "/loss_curve.csv");
    csv << "epoch,train_loss,val_loss,lr\n";
  }

  Rng rng(mix64(cfg.seed ^ 0x7072657472ULL));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    std::size_t tokens = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      std::vector<std::vector<int>> batch;
      std::size_t batch_tokens = 0;
      for (std::size_t i = at; i < std::min(order.size(), at + cfg.batch_size); ++i) {
        batch.push_back(*train[order[i]]);
        batch_tokens += batch.back().size() - 1;
      }
      const double lr_now = opt.current_lr();
      auto loss = p.batch_cross_entropy(batch);
      if (!std::isfinite(loss.item()))
        throw std::runtime_error("non-finite pretraining loss at epoch " +
                                 std::to_string(epoch) + ", step " +
                                 std::to_string(at / cfg.batch_size));
      opt.zero_grad();
      nc::backward(loss);
      opt.step();
      (void)lr_now;
      weighted += loss.item() * batch_tokens;
      tokens += batch_tokens;
    }
    res.train_loss.push_back(weighted / tokens);
    res.val_loss.push_back(dataset_loss(p, val_set, cfg.batch_size));
    if (res.best_epoch < 0 || res.val_loss.back() < res.best_val) {
      res.best_val = res.val_loss.back();
      res.best_epoch = epoch;
      if (!cfg.out_dir.empty())
        p.save(cfg.out_dir + "/model_best.json",
               {{"epoch", std::to_string(epoch)},
                {"val_loss", std::to_string(res.best_val)}});
    }
    if (csv.is_open())
      csv << epoch << "," << res.train_loss.back() << "," << res.val_loss.back() << ","
          << opt.current_lr() << "\n";
  }
  if (!cfg.out_dir.empty())
    p.save(cfg.out_dir + "/model_last.json",
           {{"epoch", std::to_string(cfg.epochs - 1)},
            {"val_loss", std::to_string(res.val_loss.back())}});
  return res;
}

}  // namespace molrl::pretrain
