#ifndef MOLRL_ORACLE_HPP
#define MOLRL_ORACLE_HPP

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "molrl/fingerprint.hpp"
#include "molrl/molecule.hpp"

namespace molrl::oracle {

enum class OracleKind {
  Isomer,
  Rediscovery,
  Similarity,
  QedLite,
  SaLite,
  AugmentedDocking,
  ExternalDocking,
  Composite,
};

const char* oracle_kind_name(OracleKind k);
std::optional<OracleKind> oracle_kind_from_name(const std::string& name);

struct OracleSpec {
  OracleKind kind = OracleKind::QedLite;
  std::map<std::string, int> target_formula;  // isomer
  std::string target_smiles;                  // rediscovery / similarity
  double isomer_tau = 1.0;
  int fp_radius = 2;
  int fp_bits = 2048;
  std::string docking_command;      // template with {input} / optional {output}
  std::string docking_replay_path;  // canonical-SMILES<TAB>score per line
  std::vector<std::pair<OracleSpec, double>> parts;  // composite: weighted mean

  std::string to_json() const;
  static OracleSpec from_json(const std::string& text);
};

// Score cache plus budget counters. All updates are atomic with respect to
// each other; budgets are never exceeded by even one call.
class OracleLedger {
 public:
  OracleLedger(std::size_t unique_budget = 25000, std::size_t total_budget = 40000)
      : unique_budget_(unique_budget), total_budget_(total_budget) {}

  std::size_t unique_budget() const { return unique_budget_; }
  std::size_t total_budget() const { return total_budget_; }
  std::size_t unique_used() const;
  std::size_t total_used() const;
  std::size_t redundancy() const;
  std::size_t cache_size() const;
  bool exhausted() const;
  std::optional<double> cached(const std::string& canonical) const;

 private:
  friend class Oracle;
  mutable std::mutex mu_;
  std::map<std::string, double> cache_;
  std::size_t unique_budget_, total_budget_;
  std::size_t unique_used_ = 0, total_used_ = 0, redundancy_ = 0;
};

struct ScoreOutcome {
  double score = 0.0;
  bool scored = false;      // false: invalid input or ledger exhausted
  bool cache_hit = false;
  bool exhausted = false;   // a budget boundary was reached
};

// ---- pinned proxy reward formulas ----

// exp(-sum_e |count_e(m) - count_e(target)| / tau)
double isomer_score(const chem::Molecule& m, const std::map<std::string, int>& target,
                    double tau = 1.0);

double rediscovery_score(const chem::Molecule& m, const chem::Molecule& target,
                         int radius = 2, int bits = 2048);

// Drug-likeness proxy in [0,1]: geometric mean of desirability curves over
// heavy-atom count, ring count, heteroatom fraction and rotatable-bond count.
double qed_lite(const chem::Molecule& m);

// Synthesizability proxy in [1,10]: logistic squash of ring-branching
// complexity, macrocycle penalty and size penalty.
double sa_lite(const chem::Molecule& m);

// r = (-ds/20) * qed * (10 - sa)/9
double augmented_docking_reward(double ds, double qed, double sa);

// descriptor helpers, exposed for the proxies and reports
int ring_count(const chem::Molecule& m);        // cycle rank
int rotatable_bond_count(const chem::Molecule& m);
double heteroatom_fraction(const chem::Molecule& m);
int smallest_ring_size(const chem::Molecule& m);  // 0 when acyclic

// ---- external docking adapter ----

// Runs an external docking program over a batch of molecules. The command
// template gets {input} (one SMILES per line) substituted, plus {output}
// when present; scores are read one per line from the output file, or from
// stdout when the template has no {output} placeholder. A failed or
// unparsable invocation yields nullopt scores; the run continues.
class DockingAdapter {
 public:
  explicit DockingAdapter(std::string command_template);
  std::vector<std::optional<double>> run(const std::vector<std::string>& smiles);
  int incidents() const { return incidents_; }

 private:
  std::string template_;
  int incidents_ = 0;
};

// ---- the oracle itself ----

class Oracle {
 public:
  explicit Oracle(OracleSpec spec);

  const OracleSpec& spec() const { return spec_; }

  // Pure evaluation, no ledger. nullopt = incident (e.g. docking score
  // unavailable); such molecules are skipped with a logged incident.
  std::optional<double> evaluate(const chem::Molecule& m);

  // Budgeted scoring. Invalid molecules score 0.0 without consuming budget.
  ScoreOutcome score(const chem::Molecule* m_or_null, OracleLedger& ledger);

  int incidents() const { return incidents_; }

 private:
  std::optional<double> docking_score(const chem::Molecule& m, const std::string& canonical);

  OracleSpec spec_;
  std::optional<chem::Molecule> target_;
  std::map<std::string, double> replay_;
  std::unique_ptr<DockingAdapter> adapter_;
  std::vector<std::unique_ptr<Oracle>> part_oracles_;
  int incidents_ = 0;
};

}  // namespace molrl::oracle

#endif
