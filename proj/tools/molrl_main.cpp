// command-line front door: ingest / pretrain / optimize / evaluate / ablate
//
// Each command takes an optional JSON config file (--config); explicit flags
// override file values and the effective merged config is written into the
// artifact directory. Unknown config keys are rejected.
//
// Exit codes: 0 success, 1 config error, 2 runtime failure.
// Environment: MOLRL_OUT_ROOT prefixes relative artifact directories.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "molrl/eval.hpp"
#include "molrl/oracle.hpp"
#include "molrl/policy.hpp"
#include "molrl/pretrain.hpp"
#include "molrl/rl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace molrl;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(f);
  } catch (const std::exception& e) {
    throw ConfigError("config parse failure in " + path + ": " + e.what());
  }
}

void reject_unknown(const json& cfg, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, val] : cfg.items()) {
    (void)val;
    if (!known.count(key)) throw ConfigError("unknown config key in " + where + ": " + key);
  }
}

std::string out_dir_path(const std::string& dir) {
  const char* root = std::getenv("MOLRL_OUT_ROOT");
  if (root && *root && !dir.empty() && dir[0] != '/')
    return (fs::path(root) / dir).string();
  return dir;
}

void write_effective_config(const json& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "config.json") << cfg.dump(2) << "\n";
}

template <typename T>
T get_or(const json& cfg, const std::string& key, T fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError("bad value type for config key: " + key);
  }
}

grammar::Grammar parse_grammar(const std::string& name) {
  auto g = grammar::grammar_from_name(name);
  if (!g) throw ConfigError("unknown grammar: " + name + " (smiles|selfies)");
  return *g;
}

policy::PolicyConfig build_policy_config(const json& cfg) {
  const std::string arch_s = get_or<std::string>(cfg, "arch", "rnn");
  auto arch = policy::arch_from_name(arch_s);
  if (!arch) throw ConfigError("unknown architecture: " + arch_s + " (fc|rnn|transformer)");
  const std::string preset = get_or<std::string>(cfg, "preset", "default");
  policy::PolicyConfig pc;
  if (preset == "default")
    pc = policy::PolicyConfig::preset_default(*arch);
  else if (preset == "tiny")
    pc = policy::PolicyConfig::preset_tiny(*arch);
  else
    throw ConfigError("unknown preset: " + preset + " (default|tiny)");
  pc.horizon = get_or<int>(cfg, "horizon", pc.horizon);
  return pc;
}

pretrain::FilterConfig build_filter(const json& cfg) {
  pretrain::FilterConfig f;
  f.min_heavy = get_or<int>(cfg, "min_heavy", f.min_heavy);
  f.max_heavy = get_or<int>(cfg, "max_heavy", f.max_heavy);
  f.allowed_elements =
      get_or<std::vector<std::string>>(cfg, "allowed_elements", f.allowed_elements);
  return f;
}

// ---- ingest ----

int cmd_ingest(const json& cfg) {
  reject_unknown(cfg, {"input", "grammar", "out_dir", "min_heavy", "max_heavy",
                       "allowed_elements"},
                 "ingest");
  const std::string input = get_or<std::string>(cfg, "input", "");
  if (input.empty()) throw ConfigError("ingest needs an input corpus (--input)");
  const std::string out_dir = out_dir_path(get_or<std::string>(cfg, "out_dir", "ingest_out"));
  auto g = parse_grammar(get_or<std::string>(cfg, "grammar", "smiles"));

  auto corpus = pretrain::ingest(input, g, build_filter(cfg));
  write_effective_config(cfg, out_dir);
  pretrain::save_corpus(corpus, (fs::path(out_dir) / "corpus.smi").string());
  corpus.vocabulary.save((fs::path(out_dir) / "vocab.txt").string());
  std::ofstream(fs::path(out_dir) / "stats.json") << pretrain::stats_json(corpus.stats) << "\n";
  std::cout << pretrain::stats_json(corpus.stats) << std::endl;
  return 0;
}

// ---- pretrain ----

int cmd_pretrain(const json& cfg) {
  reject_unknown(cfg,
                 {"corpus", "grammar", "arch", "preset", "horizon", "epochs", "batch_size",
                  "lr", "seed", "out_dir", "min_heavy", "max_heavy", "allowed_elements"},
                 "pretrain");
  const std::string path = get_or<std::string>(cfg, "corpus", "");
  if (path.empty()) throw ConfigError("pretrain needs a corpus file (--corpus)");
  const std::string out_dir = out_dir_path(get_or<std::string>(cfg, "out_dir", "pretrain_out"));
  auto g = parse_grammar(get_or<std::string>(cfg, "grammar", "smiles"));
  auto pc = build_policy_config(cfg);

  auto corpus = pretrain::ingest(path, g, build_filter(cfg));
  if (corpus.stats.kept == 0) throw ConfigError("corpus is empty after filtering: " + path);

  pretrain::PretrainConfig tc;
  tc.epochs = get_or<int>(cfg, "epochs", pc.arch == policy::Arch::Transformer ? 5 : 10);
  tc.batch_size = get_or<int>(cfg, "batch_size", 64);
  tc.lr = get_or<double>(cfg, "lr", 1e-3);
  tc.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  tc.out_dir = out_dir;

  write_effective_config(cfg, out_dir);
  corpus.vocabulary.save((fs::path(out_dir) / "vocab.txt").string());
  policy::Policy p(pc, corpus.vocabulary, tc.seed);
  auto res = pretrain::run_pretraining(p, corpus, tc);
  std::cout << "epochs=" << res.train_loss.size() << " final_train=" << res.train_loss.back()
            << " best_val=" << res.best_val << " (epoch " << res.best_epoch << ")"
            << (res.skipped_too_long
                    ? " skipped_too_long=" + std::to_string(res.skipped_too_long)
                    : "")
            << std::endl;
  return 0;
}

// ---- optimize ----

const std::set<std::string> kOptimizeKeys = {
    "checkpoint", "oracle", "unique_budget", "total_budget", "out_dir", "batch_size",
    "lr", "logp_coef", "kl_coef", "ent_coef", "buffer", "buffer_capacity", "mix_count",
    "logp_clamp", "use_baseline", "baseline_decay", "max_steps", "seed"};

int cmd_optimize(const json& cfg) {
  reject_unknown(cfg, kOptimizeKeys, "optimize");
  const std::string ck = get_or<std::string>(cfg, "checkpoint", "");
  if (ck.empty()) throw ConfigError("optimize needs a pretrained checkpoint (--checkpoint)");
  if (!cfg.contains("oracle")) throw ConfigError("optimize needs an oracle section or file");
  const std::string out_dir = out_dir_path(get_or<std::string>(cfg, "out_dir", "optimize_out"));

  oracle::OracleSpec spec;
  try {
    if (cfg["oracle"].is_string())
      spec = oracle::OracleSpec::from_json(
          [&] {
            std::ifstream f(cfg["oracle"].get<std::string>());
            if (!f) throw ConfigError("cannot open oracle file");
            return std::string((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
          }());
    else
      spec = oracle::OracleSpec::from_json(cfg["oracle"].dump());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad oracle config: ") + e.what());
  }

  rl::RLConfig rc;
  rc.batch_size = get_or<int>(cfg, "batch_size", rc.batch_size);
  rc.logp_coef = get_or<double>(cfg, "logp_coef", rc.logp_coef);
  rc.kl_coef = get_or<double>(cfg, "kl_coef", rc.kl_coef);
  rc.ent_coef = get_or<double>(cfg, "ent_coef", rc.ent_coef);
  if (cfg.contains("buffer")) {
    auto b = rl::buffer_kind_from_name(cfg["buffer"].get<std::string>());
    if (!b) throw ConfigError("unknown buffer kind: " + cfg["buffer"].dump());
    rc.buffer = *b;
  }
  rc.buffer_capacity = get_or<std::size_t>(cfg, "buffer_capacity", rc.buffer_capacity);
  rc.mix_count = get_or<std::size_t>(cfg, "mix_count", rc.mix_count);
  rc.logp_clamp = get_or<double>(cfg, "logp_clamp", rc.logp_clamp);
  rc.use_baseline = get_or<bool>(cfg, "use_baseline", rc.use_baseline);
  rc.baseline_decay = get_or<double>(cfg, "baseline_decay", rc.baseline_decay);
  rc.max_steps = get_or<int>(cfg, "max_steps", rc.max_steps);
  rc.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  rc.out_dir = out_dir;
  if (rc.logp_coef < 0 || rc.kl_coef < 0 || rc.ent_coef < 0)
    throw ConfigError("regularizer coefficients must be >= 0");

  policy::Policy p = policy::Policy::load(ck);
  // architecture-dependent default: 5e-4 for FC/RNN, 1e-4 for the transformer
  rc.lr = get_or<double>(cfg, "lr",
                         p.config().arch == policy::Arch::Transformer ? 1e-4 : 5e-4);

  std::optional<policy::Policy> prior;
  if (rc.kl_coef > 0) prior.emplace(policy::Policy::load(ck));

  oracle::Oracle orc(spec);
  oracle::OracleLedger ledger(get_or<std::size_t>(cfg, "unique_budget", 25000),
                              get_or<std::size_t>(cfg, "total_budget", 40000));

  write_effective_config(cfg, out_dir);
  auto res = rl::train(p, prior ? &*prior : nullptr, orc, ledger, rc);

  auto log = eval::load_scored_log((fs::path(out_dir) / "scored.tsv").string());
  auto metrics = eval::compute_metrics(log, {}, rc.seed);
  eval::emit_report(eval::aggregate_seeds({metrics}),
                    (fs::path(out_dir) / "metrics_report.csv").string(), {},
                    {{"seed", std::to_string(rc.seed)}});
  std::cout << "steps=" << res.steps << " scored=" << res.scored
            << " best=" << res.best_reward << " top100=" << metrics.top100
            << " unique=" << ledger.unique_used() << " total=" << ledger.total_used()
            << std::endl;
  return 0;
}

// ---- evaluate ----

void write_svg_plot(const std::map<std::string, eval::Aggregate>& agg,
                    const std::string& path) {
  // minimal static bar chart
  std::ofstream f(path);
  const int w = 120, gap = 30;
  double mx = 1e-12;
  for (const auto& [k, v] : agg) mx = std::max(mx, std::abs(v.mean));
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='"
    << agg.size() * (w + gap) + gap << "' height='300'>\n";
  int i = 0;
  for (const auto& [k, v] : agg) {
    const double h = 220.0 * std::abs(v.mean) / mx;
    const int x = gap + i * (w + gap);
    f << "<rect x='" << x << "' y='" << 250 - h << "' width='" << w << "' height='" << h
      << "' fill='steelblue'/>\n";
    f << "<text x='" << x << "' y='270' font-size='11'>" << k << "</text>\n";
    ++i;
  }
  f << "</svg>\n";
}

int cmd_evaluate(const json& cfg) {
  reject_unknown(cfg, {"runs", "out", "fp_radius", "fp_bits", "reference", "plot"},
                 "evaluate");
  auto runs = get_or<std::vector<std::string>>(cfg, "runs", {});
  if (runs.empty()) throw ConfigError("evaluate needs at least one run directory (--run)");
  const std::string out = out_dir_path(get_or<std::string>(cfg, "out", "report.csv"));
  eval::MetricsConfig mc;
  mc.fp_radius = get_or<int>(cfg, "fp_radius", mc.fp_radius);
  mc.fp_bits = get_or<int>(cfg, "fp_bits", mc.fp_bits);

  std::map<std::string, double> reference;
  if (cfg.contains("reference")) {
    std::ifstream f(cfg["reference"].get<std::string>());
    if (!f) throw ConfigError("cannot open reference file");
    for (const auto& [k, v] : json::parse(f).items())
      reference[k] = v.get<double>();
  }

  std::vector<eval::RunMetrics> all;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    fs::path p(runs[i]);
    if (fs::is_directory(p)) p /= "scored.tsv";
    all.push_back(eval::compute_metrics(eval::load_scored_log(p.string()), mc, i));
  }
  eval::emit_report(eval::aggregate_seeds(all, reference), out, mc,
                    {{"runs", std::to_string(runs.size())}});
  if (get_or<bool>(cfg, "plot", false))
    write_svg_plot(eval::aggregate_seeds(all, reference), out + ".svg");
  std::cout << "wrote " << out << " (" << all.size() << " runs)" << std::endl;
  return 0;
}

// ---- ablate ----

int cmd_ablate(const json& cfg) {
  reject_unknown(cfg, {"base", "factors", "seeds", "out_dir"}, "ablate");
  if (!cfg.contains("base")) throw ConfigError("ablate needs a 'base' optimize config");
  json base = cfg["base"];
  reject_unknown(base, kOptimizeKeys, "ablate.base");
  const std::string out_dir = out_dir_path(get_or<std::string>(cfg, "out_dir", "ablate_out"));
  auto seeds = get_or<std::vector<std::uint64_t>>(cfg, "seeds", {0});

  const std::set<std::string> factor_keys = {"buffer", "kl", "logp", "entropy",
                                             "checkpoint"};
  std::vector<std::pair<std::string, std::vector<json>>> factors;
  if (cfg.contains("factors"))
    for (const auto& [k, v] : cfg["factors"].items()) {
      if (!factor_keys.count(k))
        throw ConfigError("unknown ablation factor: " + k +
                          " (buffer|kl|logp|entropy|checkpoint)");
      if (!v.is_array() || v.empty())
        throw ConfigError("ablation factor " + k + " needs a non-empty list of levels");
      factors.emplace_back(k, std::vector<json>(v.begin(), v.end()));
    }

  // cartesian product over factor levels
  std::vector<std::map<std::string, json>> combos = {{}};
  for (const auto& [name, levels] : factors) {
    std::vector<std::map<std::string, json>> next;
    for (const auto& combo : combos)
      for (const auto& level : levels) {
        auto c = combo;
        c[name] = level;
        next.push_back(std::move(c));
      }
    combos = std::move(next);
  }

  write_effective_config(cfg, out_dir);
  std::ofstream combined(fs::path(out_dir) / "combined.csv");
  combined << "run,seed,top1,top10,top100,diversity_top100,redundancy,unique_used,"
              "total_used\n";

  for (const auto& combo : combos) {
    std::string label;
    json run_cfg = base;
    for (const auto& [k, v] : combo) {
      if (!label.empty()) label += ",";
      if (k == "kl")
        run_cfg["kl_coef"] = v.get<bool>() ? get_or<double>(base, "kl_coef", 0.001) : 0.0;
      else if (k == "logp")
        run_cfg["logp_coef"] = v.get<bool>() ? get_or<double>(base, "logp_coef", 5.0) : 0.0;
      else if (k == "entropy")
        run_cfg["ent_coef"] = v.get<bool>() ? get_or<double>(base, "ent_coef", 0.01) : 0.0;
      else
        run_cfg[k] = v;
      label += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    if (label.empty()) label = "base";
    for (auto seed : seeds) {
      run_cfg["seed"] = seed;
      std::string run_name = label + "_seed=" + std::to_string(seed);
      for (auto& ch : run_name)
        if (ch == ',') ch = '_';
      const std::string dir = (fs::path(out_dir) / run_name).string();
      run_cfg["out_dir"] = dir;
      std::cout << "[ablate] " << run_name << std::endl;
      cmd_optimize(run_cfg);
      auto m = eval::compute_metrics(
          eval::load_scored_log((fs::path(dir) / "scored.tsv").string()), {}, seed);
      combined << run_name << "," << seed << "," << m.top1 << "," << m.top10 << ","
               << m.top100 << "," << m.diversity_top100 << "," << m.redundancy << ","
               << m.unique_used << "," << m.total_used << "\n";
    }
  }
  std::cout << "wrote " << (fs::path(out_dir) / "combined.csv").string() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "molrl: text-based molecular design with RL-fine-tuned language models.\n"
      "Environment: MOLRL_OUT_ROOT prefixes relative artifact directories."};
  app.require_subcommand(1);

  // each subcommand collects a json patch; file config is loaded first and
  // flag values override it
  std::string config_path;
  json patch = json::object();

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
  };
  auto opt_str = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                     const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&patch, key](const std::string& v) { patch[key] = v; }, help);
  };
  auto opt_int = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                     const std::string& help) {
    sub->add_option_function<long long>(
        flag, [&patch, key](long long v) { patch[key] = v; }, help);
  };
  auto opt_dbl = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                     const std::string& help) {
    sub->add_option_function<double>(
        flag, [&patch, key](double v) { patch[key] = v; }, help);
  };

  auto* ingest = app.add_subcommand("ingest", "Filter + canonicalize a corpus");
  add_common(ingest);
  opt_str(ingest, "--input", "input", "corpus file, one molecule per line");
  opt_str(ingest, "--grammar", "grammar", "smiles|selfies");
  opt_str(ingest, "--out-dir", "out_dir", "artifact directory");
  opt_int(ingest, "--min-heavy", "min_heavy", "minimum heavy atoms (default 10)");
  opt_int(ingest, "--max-heavy", "max_heavy", "maximum heavy atoms (default 50)");

  auto* pre = app.add_subcommand("pretrain", "Train the prior language model");
  add_common(pre);
  opt_str(pre, "--corpus", "corpus", "corpus file");
  opt_str(pre, "--grammar", "grammar", "smiles|selfies");
  opt_str(pre, "--arch", "arch", "fc|rnn|transformer");
  opt_str(pre, "--preset", "preset", "default|tiny");
  opt_int(pre, "--horizon", "horizon", "max tokens per sequence");
  opt_int(pre, "--epochs", "epochs", "training epochs");
  opt_int(pre, "--batch-size", "batch_size", "minibatch size");
  opt_dbl(pre, "--lr", "lr", "initial learning rate (cosine schedule)");
  opt_int(pre, "--seed", "seed", "random seed");
  opt_str(pre, "--out-dir", "out_dir", "artifact directory");

  auto* opt = app.add_subcommand("optimize", "REINFORCE fine-tuning against an oracle");
  add_common(opt);
  opt_str(opt, "--checkpoint", "checkpoint", "pretrained policy checkpoint");
  opt_str(opt, "--oracle", "oracle", "oracle spec JSON file");
  opt_int(opt, "--unique-budget", "unique_budget", "unique oracle calls (default 25000)");
  opt_int(opt, "--total-budget", "total_budget", "total oracle calls (default 40000)");
  opt_int(opt, "--batch-size", "batch_size", "rollouts per step (default 64)");
  opt_dbl(opt, "--lr", "lr", "learning rate (default 5e-4; 1e-4 transformer)");
  opt_dbl(opt, "--logp-coef", "logp_coef", "log-p penalty coefficient (default 5)");
  opt_dbl(opt, "--kl-coef", "kl_coef", "KL-to-prior coefficient (default 0.001)");
  opt_dbl(opt, "--ent-coef", "ent_coef", "entropy coefficient (default 0)");
  opt_str(opt, "--buffer", "buffer", "none|hill_climb|fifo (default hill_climb)");
  opt_int(opt, "--buffer-capacity", "buffer_capacity", "buffer capacity (default 500)");
  opt_int(opt, "--mix-count", "mix_count", "buffer entries mixed per batch (default 16)");
  opt_int(opt, "--max-steps", "max_steps", "step cap; 0 = run to budget");
  opt_int(opt, "--seed", "seed", "random seed");
  opt_str(opt, "--out-dir", "out_dir", "artifact directory");

  std::vector<std::string> eval_runs;
  auto* ev = app.add_subcommand("evaluate", "Top-k / diversity / redundancy report");
  add_common(ev);
  ev->add_option("--run", eval_runs, "run directory or scored.tsv (repeatable)");
  opt_str(ev, "--out", "out", "report CSV path");
  opt_int(ev, "--fp-radius", "fp_radius", "fingerprint radius (default 2)");
  opt_int(ev, "--fp-bits", "fp_bits", "fingerprint bits (default 2048)");
  opt_str(ev, "--reference", "reference", "JSON file of normalization constants");
  ev->add_flag_function(
      "--plot", [&](std::int64_t) { patch["plot"] = true; }, "also emit an SVG bar chart");

  auto* ab = app.add_subcommand("ablate", "Matrix runner over ablation factors");
  add_common(ab);
  opt_str(ab, "--out-dir", "out_dir", "artifact directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    json cfg = load_config_file(config_path);
    for (const auto& [k, v] : patch.items()) cfg[k] = v;
    if (!eval_runs.empty()) cfg["runs"] = eval_runs;

    if (ingest->parsed()) return cmd_ingest(cfg);
    if (pre->parsed()) return cmd_pretrain(cfg);
    if (opt->parsed()) return cmd_optimize(cfg);
    if (ev->parsed()) return cmd_evaluate(cfg);
    if (ab->parsed()) return cmd_ablate(cfg);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}
