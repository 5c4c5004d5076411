#include "molrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "molrl/fingerprint.hpp"
#include "molrl/molecule.hpp"

namespace molrl::eval {

std::vector<ScoredEntry> load_scored_log(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scored log: " + path);
  std::vector<ScoredEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error("bad scored-log line " + std::to_string(lineno));
    ScoredEntry e;
    e.canonical = line.substr(0, t1);
    e.reward = std::stod(line.substr(t1 + 1, t2 - t1 - 1));
    e.step = std::stoi(line.substr(t2 + 1));
    out.push_back(std::move(e));
  }
  return out;
}

RunMetrics compute_metrics(const std::vector<ScoredEntry>& log, const MetricsConfig& cfg,
                           std::uint64_t seed) {
  if (log.empty()) throw std::invalid_argument("empty scored log");
  RunMetrics m;
  m.seed = seed;
  m.total_used = log.size();

  std::map<std::string, double> best;  // dedup: one reward per molecule
  for (const auto& e : log) {
    auto [it, fresh] = best.emplace(e.canonical, e.reward);
    if (!fresh) it->second = std::max(it->second, e.reward);
  }
  m.distinct = best.size();
  m.unique_used = best.size();
  m.redundancy = m.total_used - m.unique_used;

  std::vector<std::pair<double, std::string>> ranked;  // reward desc, name asc
  ranked.reserve(best.size());
  for (const auto& [name, r] : best) ranked.emplace_back(r, name);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  auto top_mean = [&](std::size_t k) {
    const std::size_t n = std::min(k, ranked.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += ranked[i].first;
    return sum / static_cast<double>(n);
  };
  m.top1 = top_mean(1);
  m.top10 = top_mean(10);
  m.top100 = top_mean(100);

  std::vector<fp::Fingerprint> fps;
  for (std::size_t i = 0; i < std::min<std::size_t>(100, ranked.size()); ++i) {
    auto r = chem::parse_smiles(ranked[i].second);
    if (!r.ok())
      throw std::runtime_error("scored log contains an unparsable molecule: " +
                               ranked[i].second);
    fps.push_back(fp::fingerprint(*r.mol, cfg.fp_radius, cfg.fp_bits));
  }
  m.diversity_top100 = fp::diversity(fps);
  return m;
}

namespace {

std::map<std::string, double> metric_values(const RunMetrics& m) {
  return {{"top1", m.top1},
          {"top10", m.top10},
          {"top100", m.top100},
          {"diversity_top100", m.diversity_top100},
          {"redundancy", static_cast<double>(m.redundancy)},
          {"unique_used", static_cast<double>(m.unique_used)},
          {"total_used", static_cast<double>(m.total_used)}};
}

}  // namespace

std::map<std::string, Aggregate> aggregate_seeds(
    const std::vector<RunMetrics>& runs, const std::map<std::string, double>& reference) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  std::map<std::string, std::vector<double>> series;
  for (const auto& run : runs)
    for (auto [name, v] : metric_values(run)) {
      auto ref = reference.find(name);
      if (ref != reference.end() && ref->second != 0.0) v /= ref->second;
      series[name].push_back(v);
    }
  std::map<std::string, Aggregate> out;
  for (const auto& [name, xs] : series) {
    Aggregate a;
    a.n = xs.size();
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(a.n);
    const bool all_equal =
        std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; });
    if (a.n > 1 && !all_equal) {
      double ss = 0.0;
      for (double x : xs) ss += (x - a.mean) * (x - a.mean);
      a.stderr_ = std::sqrt(ss / static_cast<double>(a.n - 1)) /
                  std::sqrt(static_cast<double>(a.n));
    }
    out[name] = a;
  }
  return out;
}

namespace {

int metric_k(const std::string& name) {
  if (name == "top1") return 1;
  if (name == "top10") return 10;
  if (name == "top100" || name == "diversity_top100") return 100;
  return 0;
}

}  // namespace

void emit_report(const std::map<std::string, Aggregate>& aggregates,
                 const std::string& csv_path, const MetricsConfig& cfg,
                 const std::map<std::string, std::string>& metadata) {
  std::ofstream f(csv_path);
  if (!f) throw std::runtime_error("cannot write report: " + csv_path);
  f << "# fingerprint_radius=" << cfg.fp_radius << "\n";
  f << "# fingerprint_bits=" << cfg.fp_bits << "\n";
  for (const auto& [k, v] : metadata) f << "# " << k << "=" << v << "\n";
  f << "metric,mean,stderr,k,seed_count\n";
  f.precision(17);
  for (const auto& [name, a] : aggregates)
    f << name << "," << a.mean << "," << a.stderr_ << "," << metric_k(name) << ","
      << a.n << "\n";
}

std::map<std::string, Aggregate> load_report(const std::string& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot open report: " + csv_path);
  std::map<std::string, Aggregate> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header row
      continue;
    }
    std::stringstream ss(line);
    std::string name, mean, se, k, n;
    std::getline(ss, name, ',');
    std::getline(ss, mean, ',');
    std::getline(ss, se, ',');
    std::getline(ss, k, ',');
    std::getline(ss, n, ',');
    Aggregate a;
    a.mean = std::stod(mean);
    a.stderr_ = std::stod(se);
    a.n = std::stoul(n);
    out[name] = a;
  }
  return out;
}

}  // namespace molrl::eval
