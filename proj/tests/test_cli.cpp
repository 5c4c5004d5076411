#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kBin = MOLRL_BIN;
const std::string kData = MOLRL_DATA_DIR;

int run(const std::string& args) {
  const int rc = std::system((kBin + " " + args + " > cli_stdout.txt 2> cli_stderr.txt").c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// one shared tiny pretrained checkpoint for the optimize tests
const std::string& checkpoint() {
  static std::string path = [] {
    fs::remove_all("cli_pre");
    REQUIRE(run("pretrain --corpus " + kData + "/toy_corpus.smi --grammar selfies"
                " --arch rnn --preset tiny --epochs 1 --seed 3 --out-dir cli_pre") == 0);
    return std::string("cli_pre/model_best.json");
  }();
  return path;
}

void write_oracle() {
  std::ofstream("cli_oracle.json") << R"({"kind": "sa_lite"})";
}

}  // namespace

TEST_CASE("ingest writes corpus, vocabulary, stats, and config") {
  fs::remove_all("cli_ing");
  REQUIRE(run("ingest --input " + kData + "/toy_corpus.smi --grammar smiles --out-dir cli_ing") == 0);
  CHECK(fs::exists("cli_ing/corpus.smi"));
  CHECK(fs::exists("cli_ing/vocab.txt"));
  CHECK(fs::exists("cli_ing/stats.json"));
  CHECK(fs::exists("cli_ing/config.json"));
  CHECK(slurp("cli_stdout.txt").find("\"kept\": 500") != std::string::npos);
}

TEST_CASE("pretrain then optimize end to end") {
  write_oracle();
  fs::remove_all("cli_opt");
  REQUIRE(run("optimize --checkpoint " + checkpoint() +
              " --oracle cli_oracle.json --unique-budget 50 --total-budget 70"
              " --batch-size 8 --seed 5 --out-dir cli_opt") == 0);
  for (const char* f : {"scored.tsv", "metrics.csv", "metrics_report.csv",
                        "model_final.json", "rl_config.json", "config.json"})
    CHECK(fs::exists(fs::path("cli_opt") / f));
  // every line of the scored log is canonical \t reward \t step
  std::ifstream log("cli_opt/scored.tsv");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    if (line.empty() || line[0] == '#') continue;
    CHECK(std::count(line.begin(), line.end(), '\t') == 2);
    ++lines;
  }
  // stops at whichever budget runs out first
  CHECK(lines <= 70);
  CHECK(lines >= 50);
}

TEST_CASE("identical config and seed give byte-identical scored logs") {
  write_oracle();
  fs::remove_all("cli_rep1");
  fs::remove_all("cli_rep2");
  const std::string common = " --oracle cli_oracle.json --unique-budget 40 --total-budget 60"
                             " --batch-size 8 --checkpoint " + checkpoint();
  REQUIRE(run("optimize" + common + " --seed 11 --out-dir cli_rep1") == 0);
  REQUIRE(run("optimize" + common + " --seed 11 --out-dir cli_rep2") == 0);
  CHECK(slurp("cli_rep1/scored.tsv") == slurp("cli_rep2/scored.tsv"));

  fs::remove_all("cli_rep3");
  REQUIRE(run("optimize" + common + " --seed 12 --out-dir cli_rep3") == 0);
  CHECK(slurp("cli_rep1/scored.tsv") != slurp("cli_rep3/scored.tsv"));
}

TEST_CASE("evaluate aggregates run directories into a report") {
  write_oracle();
  REQUIRE(fs::exists("cli_rep1/scored.tsv"));  // runs after the test above
  REQUIRE(run("evaluate --run cli_rep1 --run cli_rep3 --out cli_report.csv") == 0);
  const std::string report = slurp("cli_report.csv");
  CHECK(report.find("metric,mean,stderr,k,seed_count") != std::string::npos);
  CHECK(report.find("top100,") != std::string::npos);
  CHECK(report.find("diversity_top100,") != std::string::npos);
}

TEST_CASE("ablate expands the factor matrix into run dirs and a combined CSV") {
  write_oracle();
  fs::remove_all("cli_ab");
  std::ofstream("cli_ab.json") << R"({
    "base": {"checkpoint": ")" << checkpoint() << R"(", "oracle": "cli_oracle.json",
             "unique_budget": 20, "total_budget": 30, "batch_size": 8},
    "factors": {"buffer": ["hill_climb", "none"], "logp": [true, false]},
    "seeds": [1],
    "out_dir": "cli_ab"
  })";
  REQUIRE(run("ablate --config cli_ab.json") == 0);
  int run_dirs = 0;
  for (const auto& e : fs::directory_iterator("cli_ab"))
    if (e.is_directory()) {
      ++run_dirs;
      CHECK(fs::exists(e.path() / "scored.tsv"));
      CHECK(fs::exists(e.path() / "config.json"));
    }
  CHECK(run_dirs == 4);
  std::ifstream f("cli_ab/combined.csv");
  std::string line;
  int rows = -1;  // header
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("exit codes distinguish config errors from runtime failures") {
  std::ofstream("cli_bad.json") << R"({"bogus_key": 1})";
  CHECK(run("ingest --config cli_bad.json") == 1);
  CHECK(run("ingest") == 1);  // missing required input
  write_oracle();
  CHECK(run("optimize --checkpoint cli_no_such.json --oracle cli_oracle.json") == 2);
  CHECK(run("pretrain --corpus cli_no_such.smi --out-dir cli_x") == 2);
}
