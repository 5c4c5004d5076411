// pybind11 surface over the C++ core: chemistry, grammars, fingerprints,
// oracles, policies, pretraining, RL and evaluation.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "molrl/eval.hpp"
#include "molrl/fingerprint.hpp"
#include "molrl/grammar.hpp"
#include "molrl/molecule.hpp"
#include "molrl/oracle.hpp"
#include "molrl/policy.hpp"
#include "molrl/pretrain.hpp"
#include "molrl/rl.hpp"
#include "molrl/rng.hpp"

namespace py = pybind11;
using namespace molrl;

namespace {

chem::Molecule parse_or_throw(const std::string& smiles) {
  auto r = chem::parse_smiles(smiles);
  if (!r.ok()) throw py::value_error("invalid SMILES: " + r.message);
  return *r.mol;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "text-based molecular design core";

  // ---- chemistry ----
  m.def("parse_smiles_ok",
        [](const std::string& s) { return chem::parse_smiles(s).ok(); },
        py::arg("smiles"), "whether the string parses to a valid molecule");
  m.def("canonical_smiles",
        [](const std::string& s) { return chem::canonical_form(parse_or_throw(s)); },
        py::arg("smiles"), "order-independent canonical form");
  m.def("molecular_formula",
        [](const std::string& s) { return chem::formula(parse_or_throw(s)); },
        py::arg("smiles"), "element counts including hydrogens");
  m.def("heavy_atom_count",
        [](const std::string& s) { return parse_or_throw(s).heavy_atom_count(); },
        py::arg("smiles"));

  // ---- grammars ----
  m.def("selfies_encode",
        [](const std::string& smiles) {
          auto r = grammar::encode_selfies(parse_or_throw(smiles));
          if (!r.ok()) throw py::value_error(r.message);
          return *r.tokens;
        },
        py::arg("smiles"), "SELFIES token list for a molecule");
  m.def("selfies_decode",
        [](const std::vector<std::string>& tokens) {
          auto m2 = grammar::decode_selfies(tokens);
          return m2.atoms.empty() ? std::string() : chem::canonical_form(m2);
        },
        py::arg("tokens"),
        "decode any token stream; returns canonical SMILES ('' for the empty molecule)");
  m.def("selfies_alphabet", &grammar::selfies_alphabet);
  m.def("smiles_tokens", &grammar::split_smiles_tokens, py::arg("smiles"));

  // ---- fingerprints ----
  m.def("fingerprint_bits",
        [](const std::string& s, int radius, int bits) {
          auto f = fp::fingerprint(parse_or_throw(s), radius, bits);
          return std::vector<int>(f.set_bits.begin(), f.set_bits.end());
        },
        py::arg("smiles"), py::arg("radius") = 2, py::arg("bits") = 2048);
  m.def("tanimoto",
        [](const std::string& a, const std::string& b, int radius, int bits) {
          return fp::tanimoto(fp::fingerprint(parse_or_throw(a), radius, bits),
                              fp::fingerprint(parse_or_throw(b), radius, bits));
        },
        py::arg("a"), py::arg("b"), py::arg("radius") = 2, py::arg("bits") = 2048);

  // ---- oracles ----
  m.def("qed_lite", [](const std::string& s) { return oracle::qed_lite(parse_or_throw(s)); },
        py::arg("smiles"), "drug-likeness proxy in [0,1]");
  m.def("sa_lite", [](const std::string& s) { return oracle::sa_lite(parse_or_throw(s)); },
        py::arg("smiles"), "synthesizability proxy in [1,10]");
  m.def("augmented_docking_reward", &oracle::augmented_docking_reward, py::arg("ds"),
        py::arg("qed"), py::arg("sa"), "(-ds/20) * qed * (10 - sa)/9");

  py::class_<oracle::OracleLedger>(m, "OracleLedger")
      .def(py::init<std::size_t, std::size_t>(), py::arg("unique_budget") = 25000,
           py::arg("total_budget") = 40000)
      .def_property_readonly("unique_used", &oracle::OracleLedger::unique_used)
      .def_property_readonly("total_used", &oracle::OracleLedger::total_used)
      .def_property_readonly("redundancy", &oracle::OracleLedger::redundancy)
      .def_property_readonly("exhausted", &oracle::OracleLedger::exhausted);

  py::class_<oracle::Oracle>(m, "Oracle")
      .def(py::init([](const std::string& spec_json) {
             return oracle::Oracle(oracle::OracleSpec::from_json(spec_json));
           }),
           py::arg("spec_json"))
      .def("evaluate",
           [](oracle::Oracle& o, const std::string& smiles) {
             return o.evaluate(parse_or_throw(smiles));
           },
           py::arg("smiles"), "pure score, no budget")
      .def("score",
           [](oracle::Oracle& o, const std::string& smiles, oracle::OracleLedger& l) {
             auto parsed = chem::parse_smiles(smiles);
             auto out = o.score(parsed.ok() ? &*parsed.mol : nullptr, l);
             return py::make_tuple(out.score, out.scored, out.cache_hit, out.exhausted);
           },
           py::arg("smiles"), py::arg("ledger"),
           "budgeted score -> (score, scored, cache_hit, exhausted)");

  // ---- policies ----
  py::class_<policy::Policy>(m, "Policy")
      .def_static("load", &policy::Policy::load, py::arg("path"))
      .def("save",
           [](const policy::Policy& p, const std::string& path) { p.save(path); },
           py::arg("path"))
      .def_property_readonly("horizon",
                             [](const policy::Policy& p) { return p.config().horizon; })
      .def_property_readonly("vocab_tokens",
                             [](const policy::Policy& p) { return p.vocab().tokens(); })
      .def("sample",
           [](policy::Policy& p, std::uint64_t seed) {
             auto r = p.sample_with_seed(seed);
             std::vector<std::string> tokens;
             for (std::size_t i = 1; i < r.seq.ids.size() - (r.seq.terminated ? 1 : 0); ++i)
               tokens.push_back(p.vocab().token(r.seq.ids[i]));
             auto parsed = grammar::sequence_to_molecule(r.seq, p.vocab());
             std::string canonical;
             if (parsed.ok() && !parsed.mol->atoms.empty())
               canonical = chem::canonical_form(*parsed.mol);
             return py::make_tuple(tokens, canonical, r.total_logp);
           },
           py::arg("seed"),
           "seeded rollout -> (tokens, canonical_smiles_or_empty, log_prob)")
      .def("sequence_log_prob",
           [](policy::Policy& p, const std::vector<std::string>& tokens) {
             grammar::TokenSequence s;
             s.ids.push_back(grammar::Vocabulary::kBos);
             for (const auto& t : tokens) {
               auto id = p.vocab().id_of(t);
               if (!id) throw py::value_error("token not in vocabulary: " + t);
               s.ids.push_back(*id);
             }
             s.ids.push_back(grammar::Vocabulary::kEos);
             s.terminated = true;
             return p.sequence_log_prob(s).item();
           },
           py::arg("tokens"), "log probability of the terminated token sequence");

  // ---- pipelines ----
  m.def("ingest_corpus",
        [](const std::string& path, const std::string& grammar_name) {
          auto g = grammar::grammar_from_name(grammar_name);
          if (!g) throw py::value_error("unknown grammar: " + grammar_name);
          auto c = pretrain::ingest(path, *g, {});
          return py::make_tuple(c.stats.kept, c.stats.dropped(), c.vocabulary.tokens());
        },
        py::arg("path"), py::arg("grammar"),
        "filter + canonicalize -> (kept, dropped, vocab_tokens)");
  m.def("pretrain",
        [](const std::string& corpus_path, const std::string& grammar_name,
           const std::string& arch_name, const std::string& preset, int epochs,
           std::uint64_t seed, const std::string& out_dir) {
          auto g = grammar::grammar_from_name(grammar_name);
          if (!g) throw py::value_error("unknown grammar: " + grammar_name);
          auto arch = policy::arch_from_name(arch_name);
          if (!arch) throw py::value_error("unknown architecture: " + arch_name);
          auto corpus = pretrain::ingest(corpus_path, *g, {});
          auto pc = preset == "tiny" ? policy::PolicyConfig::preset_tiny(*arch)
                                     : policy::PolicyConfig::preset_default(*arch);
          policy::Policy p(pc, corpus.vocabulary, seed);
          pretrain::PretrainConfig tc;
          tc.epochs = epochs;
          tc.seed = seed;
          tc.out_dir = out_dir;
          auto res = pretrain::run_pretraining(p, corpus, tc);
          return py::make_tuple(res.train_loss, res.val_loss, res.best_val);
        },
        py::arg("corpus_path"), py::arg("grammar"), py::arg("arch") = "rnn",
        py::arg("preset") = "tiny", py::arg("epochs") = 10, py::arg("seed") = 0,
        py::arg("out_dir") = "",
        "next-token pretraining -> (train_loss, val_loss, best_val)");
  m.def("optimize",
        [](const std::string& checkpoint, const std::string& oracle_spec_json,
           std::size_t unique_budget, std::size_t total_budget, int batch_size,
           std::uint64_t seed, const std::string& out_dir) {
          policy::Policy p = policy::Policy::load(checkpoint);
          policy::Policy prior = policy::Policy::load(checkpoint);
          oracle::Oracle orc(oracle::OracleSpec::from_json(oracle_spec_json));
          oracle::OracleLedger ledger(unique_budget, total_budget);
          rl::RLConfig cfg;
          cfg.batch_size = batch_size;
          cfg.seed = seed;
          cfg.out_dir = out_dir;
          auto res = rl::train(p, &prior, orc, ledger, cfg);
          return py::make_tuple(res.steps, res.scored, res.best_reward,
                                res.best_canonical);
        },
        py::arg("checkpoint"), py::arg("oracle_spec_json"),
        py::arg("unique_budget") = 25000, py::arg("total_budget") = 40000,
        py::arg("batch_size") = 64, py::arg("seed") = 0, py::arg("out_dir") = "",
        "REINFORCE fine-tuning -> (steps, scored, best_reward, best_canonical)");
  m.def("run_metrics",
        [](const std::string& scored_log_path) {
          auto m2 = eval::compute_metrics(eval::load_scored_log(scored_log_path));
          py::dict d;
          d["top1"] = m2.top1;
          d["top10"] = m2.top10;
          d["top100"] = m2.top100;
          d["diversity_top100"] = m2.diversity_top100;
          d["redundancy"] = m2.redundancy;
          d["unique_used"] = m2.unique_used;
          d["total_used"] = m2.total_used;
          return d;
        },
        py::arg("scored_log_path"), "top-k / diversity / redundancy of a scored log");
}
