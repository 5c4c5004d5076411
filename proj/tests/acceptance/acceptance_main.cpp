// Acceptance gate: ten independent checks, one PASS/FAIL line each.
// Exit status 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "molrl/eval.hpp"
#include "molrl/fingerprint.hpp"
#include "molrl/grammar.hpp"
#include "molrl/molecule.hpp"
#include "molrl/oracle.hpp"
#include "molrl/policy.hpp"
#include "molrl/pretrain.hpp"
#include "molrl/rl.hpp"
#include "molrl/rng.hpp"

namespace fs = std::filesystem;
using namespace molrl;
using grammar::Grammar;
using grammar::TokenSequence;
using grammar::Vocabulary;

namespace {

const std::string kData = MOLRL_DATA_DIR;
int failures = 0;

void report(int n, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  criterion %2d  %-22s %s\n", ok ? "PASS" : "FAIL", n, name.c_str(),
              detail.c_str());
  if (!ok) ++failures;
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

// ---- 1: SELFIES totality ----

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto alphabet = grammar::selfies_alphabet();
  Rng rng(1001);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(1, 60);
  int fails = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::string> tokens;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) tokens.push_back(alphabet[pick(rng)]);
    chem::Molecule m = grammar::decode_selfies(tokens);
    if (m.atoms.empty()) continue;  // empty molecule is a legal decode
    const std::string smi = chem::write_smiles(m);
    if (!chem::parse_smiles(smi).ok()) ++fails;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "10000 random streams, " << fails << " invalid decodes, " << secs << "s";
  report(1, "selfies-totality", fails == 0 && secs < 60.0, d.str());
}

// ---- 2: SMILES round trip + canonical invariance ----

chem::Molecule permuted(const chem::Molecule& m, Rng& rng) {
  std::vector<int> perm(m.atoms.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::shuffle(perm.begin(), perm.end(), rng);
  chem::Molecule out;
  out.atoms.resize(m.atoms.size());
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    out.atoms[perm[i]] = m.atoms[i];
    out.atoms[perm[i]].index = perm[i];
  }
  for (const auto& b : m.bonds) out.bonds.push_back({perm[b.a], perm[b.b], b.order});
  return out;
}

void criterion2() {
  const auto lines = read_lines(kData + "/corpus_1k.smi");
  int rt_fail = 0;
  std::vector<chem::Molecule> mols;
  for (const auto& smi : lines) {
    auto r1 = chem::parse_smiles(smi);
    if (!r1.ok()) {
      ++rt_fail;
      continue;
    }
    auto r2 = chem::parse_smiles(chem::write_smiles(*r1.mol));
    if (!r2.ok() || chem::canonical_form(*r1.mol) != chem::canonical_form(*r2.mol) ||
        chem::formula(*r1.mol) != chem::formula(*r2.mol))
      ++rt_fail;
    else
      mols.push_back(*r1.mol);
  }

  Rng rng(1002);
  int perm_fail = 0;
  const std::size_t stride = std::max<std::size_t>(1, mols.size() / 50);
  int sampled = 0;
  for (std::size_t i = 0; i < mols.size() && sampled < 50; i += stride, ++sampled) {
    const std::string ref = chem::canonical_form(mols[i]);
    for (int k = 0; k < 1000; ++k)
      if (chem::canonical_form(permuted(mols[i], rng)) != ref) ++perm_fail;
  }
  std::ostringstream d;
  d << lines.size() << " molecules, " << rt_fail << " round-trip failures; " << sampled
    << "x1000 permutations, " << perm_fail << " canonical mismatches";
  report(2, "smiles-round-trip", rt_fail == 0 && perm_fail == 0 && sampled == 50, d.str());
}

// ---- 3: REINFORCE gradient vs finite differences ----

void criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  policy::PolicyConfig pc;
  pc.arch = policy::Arch::Rnn;
  pc.layers = 1;
  pc.hidden = 6;
  pc.embed = 4;
  pc.horizon = 6;
  Vocabulary v(Grammar::Smiles, {"C", "N", "O"});
  policy::Policy p(pc, v, 31);
  policy::Policy prior(pc, v, 32);
  rl::RLConfig cfg;
  cfg.logp_coef = 5.0;
  cfg.kl_coef = 0.001;
  cfg.ent_coef = 0.01;  // all four loss terms active
  std::vector<policy::Rollout> rollouts;
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto r = p.sample_with_seed(s);
    r.reward = 0.2 + 0.2 * static_cast<double>(s);
    rollouts.push_back(r);
  }
  auto make_loss = [&] { return rl::reinforce_loss(p, rollouts, cfg, &prior).loss; };
  auto loss = make_loss();
  nc::backward(loss);

  Rng rng(1003);
  auto& params = p.parameters();
  std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
  double worst_rel = 0.0;
  int bad = 0;
  for (int checked = 0; checked < 40; ++checked) {
    auto& t = params[pick_param(rng)];
    std::uniform_int_distribution<std::size_t> pick_entry(0, t.size() - 1);
    const std::size_t e = pick_entry(rng);
    const double analytic = t.grad().empty() ? 0.0 : t.grad()[e];
    const double h = 1e-6, orig = t.values()[e];
    t.values()[e] = orig + h;
    const double up = make_loss().item();
    t.values()[e] = orig - h;
    const double dn = make_loss().item();
    t.values()[e] = orig;
    const double fd = (up - dn) / (2 * h);
    if (std::max(std::abs(fd), std::abs(analytic)) < 1e-4) {
      if (std::abs(analytic - fd) >= 5e-8) ++bad;  // below FD noise floor
    } else {
      const double rel =
          std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 1e-10});
      worst_rel = std::max(worst_rel, rel);
      if (rel >= 1e-4) ++bad;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "40 entries, worst rel err " << worst_rel << ", " << secs << "s";
  report(3, "reinforce-gradient", bad == 0 && secs < 60.0, d.str());
}

// ---- 4: sequence probabilities sum to 1 ----

void criterion4() {
  Vocabulary v(Grammar::Smiles, {"C", "N", "O"});  // 3 chemical tokens
  bool ok = true;
  std::ostringstream d;
  for (auto arch : {policy::Arch::Fc, policy::Arch::Rnn, policy::Arch::Transformer}) {
    policy::PolicyConfig pc;
    pc.arch = arch;
    pc.layers = 2;
    pc.hidden = 8;
    pc.embed = 4;
    pc.heads = 2;
    pc.horizon = 3;
    policy::Policy p(pc, v, 41);

    // actions: everything but [PAD]; [EOS] terminates
    std::vector<int> actions;
    for (int id = 0; id < v.size(); ++id)
      if (id != Vocabulary::kPad) actions.push_back(id);

    // enumerate: any sequence of non-EOS actions up to the horizon, each
    // optionally closed by EOS along the way
    double total = 0.0;
    std::vector<int> ids = {Vocabulary::kBos};
    std::function<void(std::vector<int>&)> enumerate = [&](std::vector<int>& cur) {
      const int depth = static_cast<int>(cur.size()) - 1;
      if (depth == pc.horizon) {
        TokenSequence s;
        s.ids = cur;
        s.terminated = false;
        total += std::exp(p.sequence_log_prob(s).item());
        return;
      }
      for (int a : actions) {
        cur.push_back(a);
        if (a == Vocabulary::kEos) {
          TokenSequence s;
          s.ids = cur;
          s.terminated = true;
          total += std::exp(p.sequence_log_prob(s).item());
        } else {
          enumerate(cur);
        }
        cur.pop_back();
      }
    };
    enumerate(ids);
    const double err = std::abs(total - 1.0);
    if (err >= 1e-9) ok = false;
    d << policy::arch_name(arch) << "=" << total << " ";
  }
  report(4, "distribution-sanity", ok, d.str());
}

// ---- 5: ledger exactness under a random call stream ----

void criterion5() {
  oracle::OracleSpec spec;
  spec.kind = oracle::OracleKind::QedLite;
  oracle::Oracle orc(spec);
  oracle::OracleLedger ledger(300, 500);

  std::vector<chem::Molecule> pool;  // 400 distinct small chains
  for (int n = 0; n < 400; ++n) {
    std::string smi(n / 8 + 1, 'C');
    switch (n % 8) {
      case 1: smi += "N"; break;
      case 2: smi += "O"; break;
      case 3: smi += "F"; break;
      case 4: smi += "Cl"; break;
      case 5: smi += "Br"; break;
      case 6: smi += "NN"; break;
      case 7: smi += "NO"; break;
    }
    pool.push_back(*chem::parse_smiles(smi).mol);
  }
  Rng rng(1005);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> coin(0, 9);
  bool ok = true;
  std::size_t scored_calls = 0;
  for (int i = 0; i < 100000; ++i) {
    const chem::Molecule* m = coin(rng) == 0 ? nullptr : &pool[pick(rng)];
    auto out = orc.score(m, ledger);
    if (out.scored) ++scored_calls;
    if (ledger.unique_used() > ledger.unique_budget()) ok = false;
    if (ledger.total_used() > ledger.total_budget()) ok = false;
    if (ledger.redundancy() != ledger.total_used() - ledger.unique_used()) ok = false;
    if (out.scored && ledger.exhausted() && !out.exhausted &&
        ledger.total_used() < ledger.total_budget() &&
        ledger.unique_used() < ledger.unique_budget())
      ok = false;
  }
  // exhaustion lands exactly on a configured boundary
  const bool boundary = ledger.unique_used() == ledger.unique_budget() ||
                        ledger.total_used() == ledger.total_budget();
  if (!ledger.exhausted() || !boundary) ok = false;
  if (scored_calls != ledger.total_used()) ok = false;
  std::ostringstream d;
  d << "100000 calls: unique " << ledger.unique_used() << "/" << ledger.unique_budget()
    << ", total " << ledger.total_used() << "/" << ledger.total_budget()
    << ", redundancy " << ledger.redundancy();
  report(5, "ledger-exactness", ok, d.str());
}

// ---- 6: augmented reward arithmetic ----

void criterion6() {
  const double r = oracle::augmented_docking_reward(-10.0, 0.5, 3.0);
  const double expected = 0.5 * 0.5 * (7.0 / 9.0);
  const bool a = std::abs(r - expected) < 1e-12;
  // normalization by -20 is exact: ds = -20 contributes a factor of exactly 1
  const double unit = oracle::augmented_docking_reward(-20.0, 1.0, 1.0);
  const bool b = unit == 1.0;
  const double half = oracle::augmented_docking_reward(-5.0, 1.0, 1.0);
  const bool c = half == 0.25;
  std::ostringstream d;
  d << "r(-10,0.5,3)=" << r << ", r(-20,1,1)=" << unit;
  report(6, "augmented-reward", a && b && c, d.str());
}

// ---- 7: pretraining effect on SMILES validity ----

double valid_fraction(policy::Policy& p, std::uint64_t seed, int n) {
  Rng rng(mix64(seed));
  int valid = 0;
  for (int i = 0; i < n; ++i) {
    auto r = p.sample(rng);
    auto parsed = grammar::sequence_to_molecule(r.seq, p.vocab());
    if (parsed.ok() && !parsed.mol->atoms.empty()) ++valid;
  }
  return static_cast<double>(valid) / n;
}

void criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  auto corpus = pretrain::ingest(kData + "/toy_corpus.smi", Grammar::Smiles, {});
  bool ok = true;
  std::ostringstream d;
  double random_valid = 0.0;  // pooled over the 5 random-weight samplers
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    policy::Policy p(policy::PolicyConfig::preset_tiny(policy::Arch::Rnn),
                     corpus.vocabulary, seed);
    const double before = valid_fraction(p, seed + 100, 2000);
    random_valid += before / 5.0;
    pretrain::PretrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 8;
    tc.lr = 5e-3;
    tc.seed = seed;
    pretrain::run_pretraining(p, corpus, tc);
    const double after = valid_fraction(p, seed + 100, 400);
    if (after < 0.80) ok = false;
    d << before << "->" << after << " ";
  }
  if (random_valid >= 0.05) ok = false;
  d << "random=" << random_valid << " ";
  const double secs = seconds_since(t0);
  d << "(" << secs << "s)";
  report(7, "pretraining-effect", ok && secs < 600.0, d.str());
}

// ---- 8: RL effect on a toy rediscovery task ----

struct RunOutcome {
  eval::RunMetrics metrics;
};

eval::RunMetrics metrics_of(const std::vector<eval::ScoredEntry>& log, std::uint64_t seed) {
  return eval::compute_metrics(log, {}, seed);
}

// score molecules sampled directly from the (frozen) pretrained policy
eval::RunMetrics sampler_baseline(policy::Policy& p, oracle::Oracle& orc,
                                  std::uint64_t seed) {
  oracle::OracleLedger ledger(2000, 3000);
  Rng rng(mix64(seed ^ 0xba5e11fe));
  std::vector<eval::ScoredEntry> log;
  int step = 0;
  while (!ledger.exhausted()) {
    auto r = p.sample(rng);
    auto parsed = grammar::sequence_to_molecule(r.seq, p.vocab());
    const chem::Molecule* m =
        parsed.ok() && !parsed.mol->atoms.empty() ? &*parsed.mol : nullptr;
    auto out = orc.score(m, ledger);
    if (out.scored) log.push_back({chem::canonical_form(*m), out.score, step});
    ++step;
  }
  return metrics_of(log, seed);
}

eval::RunMetrics rl_run(const std::string& checkpoint, oracle::Oracle& orc,
                        rl::BufferKind buffer, std::uint64_t seed,
                        const std::string& out_dir) {
  policy::Policy p = policy::Policy::load(checkpoint);
  policy::Policy prior = policy::Policy::load(checkpoint);
  oracle::OracleLedger ledger(2000, 3000);
  rl::RLConfig cfg;
  cfg.buffer = buffer;
  cfg.batch_size = 16;  // more updates per oracle budget
  cfg.lr = 5e-3;        // tiny model: converge within the toy budget
  cfg.buffer_capacity = 20;  // elite-only buffer at toy budget scale
  cfg.mix_count = 8;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  rl::train(p, &prior, orc, ledger, cfg);
  return metrics_of(eval::load_scored_log(out_dir + "/scored.tsv"), seed);
}

void criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  fs::remove_all("acc_c8");
  fs::create_directories("acc_c8");

  // one shared pretrained prior (SELFIES: every sample is scoreable)
  auto corpus = pretrain::ingest(kData + "/toy_corpus.smi", Grammar::Selfies, {});
  policy::Policy pre(policy::PolicyConfig::preset_tiny(policy::Arch::Rnn),
                     corpus.vocabulary, 8);
  pretrain::PretrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 8;
  tc.lr = 5e-3;
  tc.seed = 8;
  pretrain::run_pretraining(pre, corpus, tc);
  const std::string ck = "acc_c8/pretrained.json";
  pre.save(ck);

  oracle::OracleSpec spec;
  spec.kind = oracle::OracleKind::Rediscovery;
  spec.target_smiles = "CC(=O)NC1=CC=CC=C1";  // acetanilide

  int rl_wins = 0;
  double hc_top100 = 0, none_top100 = 0, hc_red = 0, none_red = 0, hc_div = 0,
         none_div = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    oracle::Oracle o1(spec), o2(spec), o3(spec);
    auto base = sampler_baseline(pre, o1, seed);
    auto hc = rl_run(ck, o2, rl::BufferKind::HillClimb, seed,
                     "acc_c8/hc_seed" + std::to_string(seed));
    auto none = rl_run(ck, o3, rl::BufferKind::None, seed,
                       "acc_c8/none_seed" + std::to_string(seed));
    if (hc.top100 > base.top100) ++rl_wins;
    hc_top100 += hc.top100;
    none_top100 += none.top100;
    hc_red += static_cast<double>(hc.redundancy);
    none_red += static_cast<double>(none.redundancy);
    hc_div += hc.diversity_top100;
    none_div += none.diversity_top100;
  }
  const bool a = rl_wins == 5;
  const bool b = hc_top100 > none_top100;
  const bool c = hc_red > none_red && hc_div < none_div;
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "rl>pretrained " << rl_wins << "/5; top100 hc " << hc_top100 / 5 << " vs none "
    << none_top100 / 5 << "; redundancy " << hc_red / 5 << " vs " << none_red / 5
    << "; diversity " << hc_div / 5 << " vs " << none_div / 5 << " (" << secs << "s)";
  report(8, "rl-effect", a && b && c && secs < 1800.0, d.str());
}

// ---- 9: metric equivalence on archived logs ----

void criterion9() {
  bool ok = true;
  std::ostringstream d;
  for (int i = 1; i <= 3; ++i) {
    const auto log =
        eval::load_scored_log(kData + "/archived_runs/run" + std::to_string(i) + ".tsv");
    auto m = eval::compute_metrics(log);

    std::map<std::string, double> best;
    for (const auto& e : log) {
      auto [it, fresh] = best.emplace(e.canonical, e.reward);
      if (!fresh) it->second = std::max(it->second, e.reward);
    }
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [name, r] : best) ranked.emplace_back(r, name);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    auto mean_k = [&](std::size_t k) {
      k = std::min(k, ranked.size());
      double s = 0;
      for (std::size_t j = 0; j < k; ++j) s += ranked[j].first;
      return s / static_cast<double>(k);
    };
    std::vector<fp::Fingerprint> fps;
    for (std::size_t j = 0; j < std::min<std::size_t>(100, ranked.size()); ++j)
      fps.push_back(fp::fingerprint(*chem::parse_smiles(ranked[j].second).mol));
    double acc = 0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < fps.size(); ++a)
      for (std::size_t b2 = a + 1; b2 < fps.size(); ++b2) {
        acc += 1.0 - fp::tanimoto(fps[a], fps[b2]);
        ++pairs;
      }
    const double div = pairs ? acc / static_cast<double>(pairs) : 0.0;

    if (m.top1 != mean_k(1) || m.top10 != mean_k(10) || m.top100 != mean_k(100) ||
        m.diversity_top100 != div || m.redundancy != log.size() - best.size())
      ok = false;
    d << "run" << i << " top100=" << m.top100 << " ";
  }
  report(9, "metric-equivalence", ok, d.str());
}

// ---- 10: determinism ----

void criterion10() {
  fs::remove_all("acc_c10");
  auto corpus = pretrain::ingest(kData + "/toy_corpus.smi", Grammar::Selfies, {});
  policy::Policy pre(policy::PolicyConfig::preset_tiny(policy::Arch::Rnn),
                     corpus.vocabulary, 9);
  pretrain::PretrainConfig tc;
  tc.epochs = 2;
  tc.seed = 9;
  pretrain::run_pretraining(pre, corpus, tc);
  pre.save("acc_c10_pre.json");

  oracle::OracleSpec spec;
  spec.kind = oracle::OracleKind::SaLite;
  auto one_run = [&](const std::string& dir) {
    policy::Policy p = policy::Policy::load("acc_c10_pre.json");
    oracle::Oracle orc(spec);
    oracle::OracleLedger ledger(150, 200);
    rl::RLConfig cfg;
    cfg.batch_size = 16;
    cfg.kl_coef = 0.0;  // no prior in this run
    cfg.seed = 77;
    cfg.out_dir = dir;
    rl::train(p, nullptr, orc, ledger, cfg);
    std::ifstream f(dir + "/scored.tsv");
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  };
  const std::string a = one_run("acc_c10/a");
  const std::string b = one_run("acc_c10/b");
  const bool ok = !a.empty() && a == b;
  std::ostringstream d;
  d << a.size() << " bytes, logs " << (a == b ? "identical" : "differ");
  report(10, "determinism", ok, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();
  void (*criteria[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                          criterion6, criterion7, criterion8, criterion9, criterion10};
  int selected = 0;
  if (argc > 1) {  // run only the listed criteria
    for (int i = 1; i < argc; ++i) {
      const int n = std::atoi(argv[i]);
      if (n >= 1 && n <= 10) {
        criteria[n - 1]();
        ++selected;
      }
    }
  } else {
    for (auto* c : criteria) c();
    selected = 10;
  }
  std::printf("%d/%d criteria passed (%.1fs)\n", selected - failures, selected,
              seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
