#ifndef MOLRL_EVAL_HPP
#define MOLRL_EVAL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace molrl::eval {

struct ScoredEntry {
  std::string canonical;
  double reward = 0.0;
  int step = 0;
};

// canonical-SMILES<TAB>reward<TAB>step, one oracle call per line
std::vector<ScoredEntry> load_scored_log(const std::string& path);

struct MetricsConfig {
  int fp_radius = 2;
  int fp_bits = 2048;
};

struct RunMetrics {
  double top1 = 0.0;    // top-k means over distinct molecules
  double top10 = 0.0;
  double top100 = 0.0;
  double diversity_top100 = 0.0;  // mean pairwise fingerprint distance
  std::size_t distinct = 0;
  std::size_t unique_used = 0;  // == distinct molecules in the log
  std::size_t total_used = 0;   // == log lines
  std::size_t redundancy = 0;   // total - unique
  std::uint64_t seed = 0;
};

// Pure function of the scored log: molecules are deduplicated by canonical
// string before ranking; diversity is computed over the top 100 (or all, if
// fewer).
RunMetrics compute_metrics(const std::vector<ScoredEntry>& log,
                           const MetricsConfig& cfg = {}, std::uint64_t seed = 0);

struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample standard error; 0 for a single run
  std::size_t n = 0;
};

// Per-metric mean and standard error across seeds. When `reference` maps a
// metric to a nonzero value, that metric is divided by it first
// (normalized-score mode).
std::map<std::string, Aggregate> aggregate_seeds(
    const std::vector<RunMetrics>& runs,
    const std::map<std::string, double>& reference = {});

// CSV rows metric,mean,stderr,k,seed_count after '#' metadata header lines
// (fingerprint settings and free-form entries).
void emit_report(const std::map<std::string, Aggregate>& aggregates,
                 const std::string& csv_path, const MetricsConfig& cfg,
                 const std::map<std::string, std::string>& metadata = {});

std::map<std::string, Aggregate> load_report(const std::string& csv_path);

}  // namespace molrl::eval

#endif
