#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "molrl/grammar.hpp"
#include "molrl/policy.hpp"
#include "molrl/pretrain.hpp"

using namespace molrl::pretrain;
using molrl::grammar::Grammar;
using molrl::grammar::Vocabulary;
using molrl::policy::Arch;
using molrl::policy::Policy;
using molrl::policy::PolicyConfig;

namespace {

const std::string kToyCorpus = std::string(MOLRL_DATA_DIR) + "/toy_corpus.smi";

std::string write_lines(const std::string& name, const std::vector<std::string>& lines) {
  std::ofstream f(name);
  for (const auto& l : lines) f << l << "\n";
  return name;
}

Corpus toy(std::size_t limit = 0) {
  auto c = ingest(kToyCorpus, Grammar::Smiles);
  if (limit && c.canonical.size() > limit) {
    c.canonical.resize(limit);
    c.token_texts.resize(limit);
  }
  return c;
}

}  // namespace

TEST_CASE("ingest applies the four filters with per-reason counts") {
  auto path = write_lines("ingest_filters.smi", {
                                                    "CCCCCCCCC",           // 9 heavy: too small
                                                    "c1ccccc1",            // benzene: too small
                                                    "CCSCCCCCCCCC",        // sulfur: not allowed
                                                    "CC(",                 // parse failure
                                                    "CCCCC.CCCCC",         // fragments
                                                    "CCCCCCCCCC(=O)OC",    // ester: kept
                                                    "N#CC1=CC=C(CCCCC)C=C1",  // kept
                                                });
  auto c = ingest(path, Grammar::Smiles);
  CHECK(c.stats.total == 7);
  CHECK(c.stats.kept == 2);
  CHECK(c.stats.dropped_heavy == 2);
  CHECK(c.stats.dropped_element == 1);
  CHECK(c.stats.dropped_parse == 1);
  CHECK(c.stats.dropped_fragment == 1);
  CHECK(c.stats.total == c.stats.kept + c.stats.dropped());
  CHECK(c.canonical.size() == 2);
  // kept molecules are canonicalized
  for (const auto& s : c.canonical)
    CHECK(molrl::chem::canonical_form(*molrl::chem::parse_smiles(s).mol) == s);
  CHECK_THROWS(ingest("no_such_file.smi", Grammar::Smiles));
}

TEST_CASE("filter bounds are configurable") {
  auto path = write_lines("ingest_bounds.smi", {"CCO", "CCS"});
  FilterConfig f;
  f.min_heavy = 1;
  f.allowed_elements = {"C", "N", "O", "S"};
  auto c = ingest(path, Grammar::Smiles, f);
  CHECK(c.stats.kept == 2);
}

TEST_CASE("ingestion is idempotent") {
  auto c1 = ingest(kToyCorpus, Grammar::Smiles);
  CHECK(c1.stats.kept == c1.stats.total);  // the bundled corpus passes its own filters
  save_corpus(c1, "toy_reingest.smi");
  auto c2 = ingest("toy_reingest.smi", Grammar::Smiles);
  CHECK(c2.canonical == c1.canonical);
  CHECK(c2.stats.kept == c1.stats.kept);
  CHECK(c2.stats.dropped() == 0);
  CHECK(c2.vocabulary.tokens() == c1.vocabulary.tokens());
}

TEST_CASE("selfies ingestion re-encodes every molecule losslessly") {
  auto c = ingest(kToyCorpus, Grammar::Selfies);
  CHECK(c.stats.kept == c.stats.total);
  CHECK(c.vocabulary.grammar() == Grammar::Selfies);
  for (std::size_t i = 0; i < std::min<std::size_t>(25, c.canonical.size()); ++i) {
    auto m = molrl::grammar::decode_selfies(c.token_texts[i]);
    CHECK(molrl::chem::canonical_form(m) == c.canonical[i]);
  }
}

TEST_CASE("encoded corpus sequences are framed and in range") {
  auto c = toy(50);
  auto ids = encode_corpus(c);
  REQUIRE(ids.size() == 50);
  for (const auto& s : ids) {
    CHECK(s.front() == Vocabulary::kBos);
    CHECK(s.back() == Vocabulary::kEos);
    for (int id : s) {
      CHECK(id >= 0);
      CHECK(id < c.vocabulary.size());
      CHECK(id != Vocabulary::kPad);
    }
  }
}

TEST_CASE("validation split is deterministic and near 5 percent") {
  auto c = toy();
  std::size_t v1 = 0;
  for (const auto& s : c.canonical)
    if (is_validation(s)) ++v1;
  std::size_t v2 = 0;
  for (const auto& s : c.canonical)
    if (is_validation(s)) ++v2;
  CHECK(v1 == v2);
  CHECK(v1 >= 5);   // ~25 of 500 expected
  CHECK(v1 <= 80);
}

TEST_CASE("initial loss is close to log vocabulary size") {
  auto c = toy(32);
  Policy p(PolicyConfig::preset_tiny(Arch::Rnn), c.vocabulary, 3);
  auto ids = encode_corpus(c);
  std::vector<std::vector<int>> batch;
  for (const auto& s : ids)
    if (static_cast<int>(s.size()) - 1 <= p.config().horizon) batch.push_back(s);
  const double loss = p.batch_cross_entropy(batch).item();
  const double lnv = std::log(static_cast<double>(c.vocabulary.size()));
  CHECK(std::abs(loss - lnv) < 0.1 * lnv);
}

TEST_CASE("a single-molecule corpus is memorized") {
  auto path = write_lines("memorize.smi", {"CC(=O)NC1=CC=CC=C1"});
  auto c = ingest(path, Grammar::Smiles);
  REQUIRE(c.stats.kept == 1);
  Policy p(PolicyConfig::preset_tiny(Arch::Rnn), c.vocabulary, 5);
  PretrainConfig cfg;
  cfg.epochs = 1500;
  cfg.batch_size = 1;
  cfg.lr = 1e-2;
  cfg.schedule = molrl::nc::LrSchedule::Constant;
  cfg.seed = 1;
  auto res = run_pretraining(p, c, cfg);
  CHECK(res.val_loss.back() < 0.02);
  int hits = 0;
  const int n = 300;
  for (int s = 0; s < n; ++s) {
    auto r = p.sample_with_seed(1000 + s);
    auto parsed = molrl::grammar::sequence_to_molecule(r.seq, c.vocabulary);
    if (parsed.ok() && molrl::chem::canonical_form(*parsed.mol) == c.canonical[0]) ++hits;
  }
  CHECK(hits >= n * 99 / 100);
}

TEST_CASE("toy-corpus validation loss decreases under smoothing") {
  auto c = toy();
  Policy p(PolicyConfig::preset_tiny(Arch::Rnn), c.vocabulary, 11);
  PretrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 64;
  cfg.seed = 2;
  cfg.out_dir = "pretrain_toy_run";
  auto res = run_pretraining(p, c, cfg);
  REQUIRE(res.val_loss.size() == 10);
  auto smooth = [&](std::size_t i) {
    return (res.val_loss[i] + res.val_loss[i + 1] + res.val_loss[i + 2]) / 3.0;
  };
  for (std::size_t i = 0; i + 3 < res.val_loss.size() - 1; ++i) CHECK(smooth(i + 1) < smooth(i));
  CHECK(res.val_loss.back() < res.val_loss.front());
  CHECK(res.best_epoch >= 0);
  CHECK(std::filesystem::exists("pretrain_toy_run/loss_curve.csv"));
  CHECK(std::filesystem::exists("pretrain_toy_run/model_best.json"));
  CHECK(std::filesystem::exists("pretrain_toy_run/model_last.json"));
  // the final checkpoint reloads into an equivalent policy
  auto q = Policy::load("pretrain_toy_run/model_last.json");
  CHECK(q.sample_with_seed(77).seq.ids == p.sample_with_seed(77).seq.ids);
}

TEST_CASE("pretraining is bit-reproducible for a fixed seed") {
  auto c = toy(60);
  PretrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 9;
  Policy a(PolicyConfig::preset_tiny(Arch::Rnn), c.vocabulary, 21);
  Policy b(PolicyConfig::preset_tiny(Arch::Rnn), c.vocabulary, 21);
  auto ra = run_pretraining(a, c, cfg);
  auto rb = run_pretraining(b, c, cfg);
  CHECK(ra.train_loss == rb.train_loss);
  CHECK(ra.val_loss == rb.val_loss);
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(a.parameters()[i].values() == b.parameters()[i].values());
}

TEST_CASE("vocabulary mismatch is rejected") {
  auto c = toy(10);
  Policy p(PolicyConfig::preset_tiny(Arch::Rnn), Vocabulary(Grammar::Smiles, {"C"}), 1);
  PretrainConfig cfg;
  CHECK_THROWS(run_pretraining(p, c, cfg));
}
