#include "molrl/oracle.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace molrl::oracle {

using chem::BondOrder;
using chem::Molecule;
using nlohmann::json;

namespace {

const std::array<std::pair<OracleKind, const char*>, 8> kKindNames = {{
    {OracleKind::Isomer, "isomer"},
    {OracleKind::Rediscovery, "rediscovery"},
    {OracleKind::Similarity, "similarity"},
    {OracleKind::QedLite, "qed_lite"},
    {OracleKind::SaLite, "sa_lite"},
    {OracleKind::AugmentedDocking, "augmented_docking"},
    {OracleKind::ExternalDocking, "external_docking"},
    {OracleKind::Composite, "composite"},
}};

}  // namespace

const char* oracle_kind_name(OracleKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

std::optional<OracleKind> oracle_kind_from_name(const std::string& name) {
  for (const auto& [kind, n] : kKindNames)
    if (name == n) return kind;
  return std::nullopt;
}

// ---- spec serialization ----

namespace {

json spec_to_json(const OracleSpec& s) {
  json j;
  j["kind"] = oracle_kind_name(s.kind);
  if (!s.target_formula.empty()) j["target_formula"] = s.target_formula;
  if (!s.target_smiles.empty()) j["target_smiles"] = s.target_smiles;
  if (s.isomer_tau != 1.0) j["isomer_tau"] = s.isomer_tau;
  if (s.fp_radius != 2) j["fp_radius"] = s.fp_radius;
  if (s.fp_bits != 2048) j["fp_bits"] = s.fp_bits;
  if (!s.docking_command.empty()) j["docking_command"] = s.docking_command;
  if (!s.docking_replay_path.empty()) j["docking_replay"] = s.docking_replay_path;
  if (!s.parts.empty()) {
    json parts = json::array();
    for (const auto& [sub, w] : s.parts)
      parts.push_back({{"weight", w}, {"oracle", spec_to_json(sub)}});
    j["parts"] = parts;
  }
  return j;
}

OracleSpec spec_from_json(const json& j) {
  OracleSpec s;
  const auto kind = oracle_kind_from_name(j.at("kind").get<std::string>());
  if (!kind) throw std::runtime_error("unknown oracle kind: " + j.at("kind").dump());
  s.kind = *kind;
  for (const auto& [key, val] : j.items()) {
    if (key == "kind") continue;
    if (key == "target_formula")
      s.target_formula = val.get<std::map<std::string, int>>();
    else if (key == "target_smiles")
      s.target_smiles = val.get<std::string>();
    else if (key == "isomer_tau")
      s.isomer_tau = val.get<double>();
    else if (key == "fp_radius")
      s.fp_radius = val.get<int>();
    else if (key == "fp_bits")
      s.fp_bits = val.get<int>();
    else if (key == "docking_command")
      s.docking_command = val.get<std::string>();
    else if (key == "docking_replay")
      s.docking_replay_path = val.get<std::string>();
    else if (key == "parts")
      for (const auto& p : val)
        s.parts.emplace_back(spec_from_json(p.at("oracle")), p.at("weight").get<double>());
    else
      throw std::runtime_error("unknown oracle config key: " + key);
  }
  return s;
}

}  // namespace

std::string OracleSpec::to_json() const { return spec_to_json(*this).dump(2); }

OracleSpec OracleSpec::from_json(const std::string& text) {
  return spec_from_json(json::parse(text));
}

// ---- ledger ----

std::size_t OracleLedger::unique_used() const {
  std::lock_guard<std::mutex> lock(mu_);
  return unique_used_;
}
std::size_t OracleLedger::total_used() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_used_;
}
std::size_t OracleLedger::redundancy() const {
  std::lock_guard<std::mutex> lock(mu_);
  return redundancy_;
}
std::size_t OracleLedger::cache_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}
bool OracleLedger::exhausted() const {
  std::lock_guard<std::mutex> lock(mu_);
  return unique_used_ >= unique_budget_ || total_used_ >= total_budget_;
}
std::optional<double> OracleLedger::cached(const std::string& canonical) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(canonical);
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

// ---- descriptors ----

int ring_count(const Molecule& m) {
  // cycle rank of a connected graph
  return static_cast<int>(m.bonds.size()) - static_cast<int>(m.atoms.size()) + 1;
}

namespace {

// is bond (a,b) on a cycle? yes iff a..b stay connected without it
bool bond_in_ring(const Molecule& m, int skip_bond) {
  const auto& b = m.bonds[skip_bond];
  std::vector<char> seen(m.atoms.size(), 0);
  std::queue<int> q;
  q.push(b.a);
  seen[b.a] = 1;
  while (!q.empty()) {
    int cur = q.front();
    q.pop();
    if (cur == b.b) return true;
    for (std::size_t i = 0; i < m.bonds.size(); ++i) {
      if (static_cast<int>(i) == skip_bond) continue;
      const auto& e = m.bonds[i];
      int next = -1;
      if (e.a == cur) next = e.b;
      else if (e.b == cur) next = e.a;
      if (next >= 0 && !seen[next]) {
        seen[next] = 1;
        q.push(next);
      }
    }
  }
  return false;
}

}  // namespace

int rotatable_bond_count(const Molecule& m) {
  int rot = 0;
  for (std::size_t i = 0; i < m.bonds.size(); ++i) {
    const auto& b = m.bonds[i];
    if (b.order != BondOrder::Single) continue;
    if (m.degree(b.a) < 2 || m.degree(b.b) < 2) continue;
    if (bond_in_ring(m, static_cast<int>(i))) continue;
    ++rot;
  }
  return rot;
}

double heteroatom_fraction(const Molecule& m) {
  if (m.atoms.empty()) return 0.0;
  int het = 0;
  for (const auto& a : m.atoms)
    if (a.element != "C") ++het;
  return static_cast<double>(het) / static_cast<double>(m.atoms.size());
}

int smallest_ring_size(const Molecule& m) {
  // girth via BFS from every atom
  const auto adj = m.adjacency();
  int best = 0;
  const int n = static_cast<int>(m.atoms.size());
  for (int src = 0; src < n; ++src) {
    std::vector<int> dist(n, -1), parent(n, -1);
    std::queue<int> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
      int cur = q.front();
      q.pop();
      for (const auto& [next, order] : adj[cur]) {
        (void)order;
        if (dist[next] < 0) {
          dist[next] = dist[cur] + 1;
          parent[next] = cur;
          q.push(next);
        } else if (next != parent[cur]) {
          int cycle = dist[cur] + dist[next] + 1;
          if (best == 0 || cycle < best) best = cycle;
        }
      }
    }
  }
  return best;
}

// ---- proxy rewards ----

double isomer_score(const Molecule& m, const std::map<std::string, int>& target, double tau) {
  auto f = chem::formula(m);
  double miss = 0.0;
  for (const auto& [el, cnt] : target) {
    auto it = f.find(el);
    miss += std::abs((it == f.end() ? 0 : it->second) - cnt);
  }
  for (const auto& [el, cnt] : f)
    if (!target.count(el)) miss += cnt;
  return std::exp(-miss / tau);
}

double rediscovery_score(const Molecule& m, const Molecule& target, int radius, int bits) {
  return fp::tanimoto(fp::fingerprint(m, radius, bits), fp::fingerprint(target, radius, bits));
}

namespace {

double desirability(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-z * z);
}

}  // namespace

double qed_lite(const Molecule& m) {
  const double d_size = desirability(m.heavy_atom_count(), 25.0, 15.0);
  const double d_rings = desirability(ring_count(m), 2.0, 2.0);
  const double d_het = desirability(heteroatom_fraction(m), 0.25, 0.25);
  const double d_rot = desirability(rotatable_bond_count(m), 4.0, 6.0);
  return std::pow(d_size * d_rings * d_het * d_rot, 0.25);
}

double sa_lite(const Molecule& m) {
  const double heavy = std::max(1, m.heavy_atom_count());
  int branch_atoms = 0;
  for (const auto& a : m.atoms)
    if (m.degree(a.index) >= 3) ++branch_atoms;
  const double complexity = (branch_atoms + ring_count(m)) / heavy;
  const int girth = smallest_ring_size(m);
  const double macro = girth > 8 ? 1.0 : 0.0;
  const double size_pen = std::max(0.0, heavy - 30.0) / 10.0;
  const double z = -2.0 + 4.0 * complexity + 2.0 * macro + 1.0 * size_pen;
  return 1.0 + 9.0 / (1.0 + std::exp(-z));
}

double augmented_docking_reward(double ds, double qed, double sa) {
  return (-ds / 20.0) * qed * (10.0 - sa) / 9.0;
}

// ---- docking adapter ----

DockingAdapter::DockingAdapter(std::string command_template)
    : template_(std::move(command_template)) {}

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string temp_path(const char* stem) {
  static int counter = 0;
  std::ostringstream os;
  os << "molrl_dock_" << stem << "_" << ::getpid() << "_" << counter++ << ".txt";
  const char* dir = std::getenv("TMPDIR");
  return std::string(dir ? dir : "/tmp") + "/" + os.str();
}

}  // namespace

std::vector<std::optional<double>> DockingAdapter::run(const std::vector<std::string>& smiles) {
  std::vector<std::optional<double>> out(smiles.size());
  if (smiles.empty()) return out;

  const std::string in_path = temp_path("in");
  {
    std::ofstream f(in_path);
    for (const auto& s : smiles) f << s << "\n";
  }
  const bool via_file = template_.find("{output}") != std::string::npos;
  const std::string out_path = via_file ? temp_path("out") : "";
  std::string cmd = replace_all(template_, "{input}", in_path);
  if (via_file) cmd = replace_all(cmd, "{output}", out_path);

  std::string captured;
  int status = -1;
  if (via_file) {
    status = std::system(cmd.c_str());
  } else {
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe) {
      char buf[4096];
      std::size_t n;
      while ((n = ::fread(buf, 1, sizeof buf, pipe)) > 0) captured.append(buf, n);
      status = ::pclose(pipe);
    }
  }

  if (status != 0) {
    ++incidents_;
  } else {
    std::istringstream lines(via_file ? [&] {
      std::ifstream f(out_path);
      std::stringstream ss;
      ss << f.rdbuf();
      return ss.str();
    }() : captured);
    std::string line;
    std::size_t i = 0;
    while (i < out.size() && std::getline(lines, line)) {
      try {
        std::size_t used = 0;
        const double v = std::stod(line, &used);
        out[i] = v;
        (void)used;
      } catch (const std::exception&) {
        ++incidents_;  // unparsable line: leave this molecule unscored
      }
      ++i;
    }
    if (i < out.size()) ++incidents_;  // short output
  }

  std::remove(in_path.c_str());
  if (via_file) std::remove(out_path.c_str());
  return out;
}

// ---- oracle ----

Oracle::Oracle(OracleSpec spec) : spec_(std::move(spec)) {
  if (!spec_.target_smiles.empty()) {
    auto r = chem::parse_smiles(spec_.target_smiles);
    if (!r.ok())
      throw std::runtime_error("oracle target does not parse: " + spec_.target_smiles + " (" +
                               r.message + ")");
    target_ = *r.mol;
  }
  if ((spec_.kind == OracleKind::Rediscovery || spec_.kind == OracleKind::Similarity) && !target_)
    throw std::runtime_error("rediscovery/similarity oracle needs target_smiles");
  if (spec_.kind == OracleKind::Isomer && spec_.target_formula.empty())
    throw std::runtime_error("isomer oracle needs target_formula");

  if (!spec_.docking_replay_path.empty()) {
    std::ifstream f(spec_.docking_replay_path);
    if (!f) throw std::runtime_error("cannot open docking replay: " + spec_.docking_replay_path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("bad replay line " + std::to_string(lineno));
      replay_[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
    }
  }
  if ((spec_.kind == OracleKind::AugmentedDocking || spec_.kind == OracleKind::ExternalDocking) &&
      replay_.empty()) {
    if (spec_.docking_command.empty())
      throw std::runtime_error("docking oracle needs a replay file or a command");
    adapter_ = std::make_unique<DockingAdapter>(spec_.docking_command);
  }
  for (const auto& [sub, w] : spec_.parts) {
    (void)w;
    part_oracles_.push_back(std::make_unique<Oracle>(sub));
  }
  if (spec_.kind == OracleKind::Composite && part_oracles_.empty())
    throw std::runtime_error("composite oracle needs parts");
}

std::optional<double> Oracle::docking_score(const Molecule& m, const std::string& canonical) {
  auto it = replay_.find(canonical);
  if (it != replay_.end()) return it->second;
  if (adapter_) {
    auto scores = adapter_->run({chem::write_smiles(m)});
    if (!scores.empty() && scores[0]) {
      replay_[canonical] = *scores[0];  // remember; external calls are expensive
      return scores[0];
    }
  }
  ++incidents_;
  return std::nullopt;
}

std::optional<double> Oracle::evaluate(const Molecule& m) {
  switch (spec_.kind) {
    case OracleKind::Isomer:
      return isomer_score(m, spec_.target_formula, spec_.isomer_tau);
    case OracleKind::Rediscovery:
    case OracleKind::Similarity:
      return rediscovery_score(m, *target_, spec_.fp_radius, spec_.fp_bits);
    case OracleKind::QedLite:
      return qed_lite(m);
    case OracleKind::SaLite:
      return sa_lite(m);
    case OracleKind::ExternalDocking: {
      auto ds = docking_score(m, chem::canonical_form(m));
      if (!ds) return std::nullopt;
      return *ds;
    }
    case OracleKind::AugmentedDocking: {
      auto ds = docking_score(m, chem::canonical_form(m));
      if (!ds) return std::nullopt;
      return augmented_docking_reward(*ds, qed_lite(m), sa_lite(m));
    }
    case OracleKind::Composite: {
      double total = 0.0, weight = 0.0;
      for (std::size_t i = 0; i < part_oracles_.size(); ++i) {
        auto v = part_oracles_[i]->evaluate(m);
        if (!v) {
          ++incidents_;
          return std::nullopt;
        }
        total += spec_.parts[i].second * *v;
        weight += spec_.parts[i].second;
      }
      return weight > 0.0 ? total / weight : 0.0;
    }
  }
  return std::nullopt;
}

ScoreOutcome Oracle::score(const Molecule* m_or_null, OracleLedger& ledger) {
  ScoreOutcome out;
  if (!m_or_null) return out;  // invalid molecule: reward 0, no budget

  const std::string canonical = chem::canonical_form(*m_or_null);
  std::unique_lock<std::mutex> lock(ledger.mu_);
  if (ledger.unique_used_ >= ledger.unique_budget_ ||
      ledger.total_used_ >= ledger.total_budget_) {
    out.exhausted = true;
    return out;
  }
  auto it = ledger.cache_.find(canonical);
  if (it != ledger.cache_.end()) {
    ++ledger.total_used_;
    ++ledger.redundancy_;
    out.score = it->second;
    out.scored = true;
    out.cache_hit = true;
    out.exhausted = ledger.total_used_ >= ledger.total_budget_ ||
                    ledger.unique_used_ >= ledger.unique_budget_;
    return out;
  }

  lock.unlock();  // the expensive part runs without the ledger lock
  auto v = evaluate(*m_or_null);
  lock.lock();
  if (!v) return out;  // incident (already counted): unscored, no budget
  if (auto raced = ledger.cache_.find(canonical); raced != ledger.cache_.end()) {
    // another thread scored it while we were evaluating: count a hit instead
    ++ledger.total_used_;
    ++ledger.redundancy_;
    out.score = raced->second;
    out.scored = true;
    out.cache_hit = true;
    out.exhausted = ledger.total_used_ >= ledger.total_budget_ ||
                    ledger.unique_used_ >= ledger.unique_budget_;
    return out;
  }
  ledger.cache_[canonical] = *v;
  ++ledger.unique_used_;
  ++ledger.total_used_;
  out.score = *v;
  out.scored = true;
  out.exhausted = ledger.total_used_ >= ledger.total_budget_ ||
                  ledger.unique_used_ >= ledger.unique_budget_;
  return out;
}

}  // namespace molrl::oracle
