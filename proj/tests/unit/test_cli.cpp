#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kdpg/checkpoint.hpp"
#include "kdpg/cli.hpp"
#include "kdpg/config.hpp"
#include "kdpg/ebm.hpp"
#include "kdpg/io.hpp"
#include "kdpg/tiny.hpp"
#include "kdpg/tuning.hpp"

using namespace kdpg;
namespace fs = std::filesystem;

namespace {

const fs::path& root() {
  static const fs::path r = [] {
    const fs::path p = fs::temp_directory_path() / "kdpg_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return r;
}

std::string path(const std::string& name) { return (root() / name).string(); }

int run(std::vector<std::string> args, std::string* log_out = nullptr) {
  std::ostringstream log;
  const int code = run_cli(args, log);
  if (log_out) *log_out = log.str();
  return code;
}

// A small but complete configuration.
const std::string& small_config() {
  static const std::string p = [] {
    const std::string file = path("small.conf");
    write_file(file,
               "# small pipeline\n"
               "seed = 5\n"
               "max_len = 16\n"
               "corpus.n_train = 300\n"
               "corpus.n_test = 40\n"
               "corpus.max_statements = 2\n"
               "corpus.max_depth = 2\n"
               "model.context = 4\n"
               "model.embed = 6\n"
               "model.hidden = 12\n"
               "train.epochs = 1\n"
               "tune.batch = 8\n"
               "tune.updates = 4\n"
               "tune.warmup = 2\n"
               "tune.eval_interval = 2\n"
               "tune.eval_samples = 32\n"
               "tune.self_bleu_samples = 16\n"
               "eval.samples = 40\n"
               "eval.self_bleu_samples = 16\n"
               "eval.repeats = 2\n");
    return file;
  }();
  return p;
}

// gen-corpus and train-base once, shared by the tests below.
struct Pipeline {
  std::string data = path("data");
  std::string base = path("base");
  Pipeline() {
    REQUIRE(run({"gen-corpus", "--config", small_config(), "--out", data}) == 0);
    REQUIRE(run({"train-base", "--config", small_config(), "--data", data, "--out", base}) == 0);
  }
  std::string base_ckpt() const { return base + "/policy.ckpt"; }
};

const Pipeline& pipeline() {
  static const Pipeline p;
  return p;
}

nlohmann::json manifest(const std::string& dir) { return nlohmann::json::parse(read_file(fs::path(dir) / "manifest.json")); }

std::size_t lines(const std::string& file) {
  const std::string s = read_file(file);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("config files: comments, overrides, typed getters") {
  const Config c = Config::parse(
      "# comment\n\nseed = 3\ntune.method = reinforce-b  # trailing\nflag = yes\nlist = a, b ,c\n"
      "nums = 1, 2.5\n");
  CHECK(c.get_u64("seed", 0) == 3);
  CHECK(c.get_string("tune.method", "") == "reinforce-b");
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_list("list") == std::vector<std::string>{"a", "b", "c"});
  CHECK(c.get_doubles("nums") == std::vector<double>{1.0, 2.5});
  CHECK(c.get_double("missing", 0.5) == 0.5);
  Config d = c;
  d.set("seed", "4");
  CHECK(d.get_u64("seed", 0) == 4);
  CHECK_THROWS_AS(Config::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("Bad-Key = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("seed = abc\n").get_u64("seed", 0), ConfigError);
  CHECK_THROWS_AS(Config::parse("flag = maybe\n").get_bool("flag", false), ConfigError);
  CHECK_THROWS_AS(c.check_known({"seed"}), ConfigError);
}

TEST_CASE("gen-corpus is deterministic and records its outputs") {
  const std::string a = path("corpus_a");
  const std::string b = path("corpus_b");
  REQUIRE(run({"gen-corpus", "--config", small_config(), "--out", a}) == 0);
  REQUIRE(run({"gen-corpus", "--config", small_config(), "--out", b}) == 0);
  for (const char* f : {"train.txt", "test.txt", "dataset.json"}) {
    CHECK(file_sha256(fs::path(a) / f) == file_sha256(fs::path(b) / f));
  }
  CHECK(lines(a + "/train.txt") == 300);
  REQUIRE(run({"gen-corpus", "--config", small_config(), "--seed", "6", "--out", path("corpus_c")}) == 0);
  CHECK(file_sha256(a + "/train.txt") != file_sha256(path("corpus_c") + "/train.txt"));

  const auto m = manifest(a);
  CHECK(m["subcommand"] == "gen-corpus");
  CHECK(m["version"] == kVersion);
  CHECK(m["seed"] == 5);
  CHECK(m["config"]["corpus.n_train"] == "300");
  CHECK(m.contains("wall_clock_seconds"));
  CHECK(m["outputs"].size() == 3);
  for (const auto& o : m["outputs"]) {
    CHECK(o["sha256"] == file_sha256(fs::path(a) / o["path"].get<std::string>()));
  }
}

TEST_CASE("train-base writes a checkpoint, a log and its inputs") {
  const auto& p = pipeline();
  CHECK(fs::exists(p.base_ckpt()));
  CHECK(lines(p.base + "/train_log.csv") >= 2);
  const auto m = manifest(p.base);
  CHECK(m["inputs"].size() == 3);
  for (const auto& in : m["inputs"]) {
    CHECK(in["role"] == "data");
    CHECK(in["sha256"] == file_sha256(in["path"].get<std::string>()));
  }
  CHECK(load_policy(p.base_ckpt()).arch() == Policy::Arch::Neural);
}

TEST_CASE("tune with zero updates returns the base checkpoint unchanged") {
  const auto& p = pipeline();
  const std::string out = path("tune0");
  REQUIRE(run({"tune", "--config", small_config(), "--base", p.base_ckpt(), "--data", p.data, "--updates",
               "0", "--out", out}) == 0);
  CHECK(file_sha256(out + "/policy.ckpt") == file_sha256(p.base_ckpt()));
  CHECK(lines(out + "/trace.csv") == 2);
}

TEST_CASE("tune, evaluate and report produce the documented shapes") {
  const auto& p = pipeline();
  std::vector<std::string> traces;
  for (const char* method : {"kldpg", "reinforce-b", "reinforce-p"}) {
    const std::string out = path(std::string("tune_") + method);
    REQUIRE(run({"tune", "--config", small_config(), "--base", p.base_ckpt(), "--data", p.data, "--method",
                 method, "--out", out}) == 0);
    traces.push_back(out + "/trace.csv");
    // evaluations at 0, 2 and 4
    CHECK(lines(out + "/trace.csv") == 4);
    CHECK(lines(out + "/updates.csv") == 5);
    const auto m = manifest(out);
    CHECK(m["run"]["tune"]["method"] == method);
    CHECK(m["inputs"][0]["role"] == "base");
  }

  const std::string eval = path("eval");
  REQUIRE(run({"evaluate", "--config", small_config(), "--policy", path("tune_kldpg") + "/policy.ckpt", "--base",
               p.base_ckpt(), "--data", p.data, "--out", eval}) == 0);
  for (const char* f : {"metrics.json", "metrics.csv", "error_histogram.csv", "rank_frequency.csv",
                        "error_repeats.csv"}) {
    CHECK(fs::exists(fs::path(eval) / f));
  }
  const auto metrics = nlohmann::json::parse(read_file(eval + "/metrics.json"));
  CHECK(metrics.contains("compilability_rate"));
  CHECK(lines(eval + "/error_histogram.csv") == 6);

  const std::string rep = path("report");
  std::vector<std::string> args = {"report", "--out", rep};
  args.insert(args.end(), traces.begin(), traces.end());
  REQUIRE(run(args) == 0);
  const std::size_t metrics_per_row = TuneTrace::csv_header().size() - 2;
  CHECK(lines(rep + "/long.csv") == 1 + 3 * 3 * metrics_per_row);
  CHECK(lines(rep + "/summary.csv") == 1 + 3 * metrics_per_row);
  CHECK(read_file(rep + "/summary.md").find("reinforce-p") != std::string::npos);
}

TEST_CASE("report rejects traces that do not match the schema") {
  write_file(path("empty.csv"), "");
  std::string log;
  CHECK(run({"report", "--out", path("report_empty"), path("empty.csv")}, &log) == kExitRuntime);
  CHECK(log.find("SchemaMismatch") != std::string::npos);
  write_file(path("wrong.csv"), "a,b\n1,2\n");
  CHECK(run({"report", "--out", path("report_wrong"), path("wrong.csv")}, &log) == kExitRuntime);
  CHECK(log.find("SchemaMismatch") != std::string::npos);
}

TEST_CASE("prompted samples start with the prompt") {
  const auto& p = pipeline();
  const std::string out = path("samples");
  REQUIRE(run({"sample", "--config", small_config(), "--policy", p.base_ckpt(), "--prompt", "x =", "-n", "40",
               "--out", out}) == 0);
  std::istringstream in(read_file(out + "/samples.txt"));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line); ++n) CHECK(line.rfind("x =", 0) == 0);
  CHECK(n == 40);
  CHECK(lines(out + "/samples.csv") == 41);
}

TEST_CASE("enumerate-exact reports the tiny partition function") {
  const std::string out = path("exact");
  REQUIRE(run({"enumerate-exact", "--config", small_config(), "--out", out}) == 0);
  const auto z = nlohmann::json::parse(read_file(out + "/partition.json"));
  const TinySetup tiny = tiny_setup(5);
  const Ebm ebm(tiny.base, compile_scorer(tiny.vocab));
  CHECK(z["z"].get<double>() == doctest::Approx(exact_z(ebm, tiny.max_len).value).epsilon(1e-12));
  CHECK(z["support"] == 2);
  CHECK(fs::exists(out + "/base.ckpt"));
  CHECK(lines(out + "/exact_p.csv") == 3);
}

TEST_CASE("output directories are never silently overwritten") {
  const std::string out = path("overwrite");
  REQUIRE(run({"gen-corpus", "--config", small_config(), "--out", out}) == 0);
  const std::string before = file_sha256(out + "/train.txt");
  CHECK(run({"gen-corpus", "--config", small_config(), "--seed", "9", "--out", out}) == kExitConfig);
  CHECK(file_sha256(out + "/train.txt") == before);
  REQUIRE(run({"gen-corpus", "--config", small_config(), "--seed", "9", "--out", out, "--force"}) == 0);
  CHECK(file_sha256(out + "/train.txt") != before);
  // files that no earlier run produced block --force
  write_file(out + "/notes.txt", "mine\n");
  CHECK(run({"gen-corpus", "--config", small_config(), "--out", out, "--force"}) == kExitConfig);
  CHECK(fs::exists(out + "/notes.txt"));
}

TEST_CASE("exit codes") {
  const auto& p = pipeline();
  std::string log;
  CHECK(run({"--version"}, &log) == kExitOk);
  CHECK(log.find(kVersion) != std::string::npos);
  CHECK(run({"gen-corpus", "--help"}) == kExitOk);
  CHECK(run({}) == kExitConfig);
  CHECK(run({"frobnicate", "--out", path("x")}) == kExitConfig);
  CHECK(run({"gen-corpus"}) == kExitConfig);  // --out is required
  CHECK(run({"gen-corpus", "--out", path("typo"), "--corpus.n_trian=5"}, &log) == kExitConfig);
  CHECK(log.find("corpus.n_trian") != std::string::npos);
  CHECK(run({"gen-corpus", "--out", path("bad_p"), "--corpus.p_corrupt=2"}) == kExitConfig);
  CHECK(run({"tune", "--out", path("no_base")}) == kExitConfig);
  CHECK(run({"tune", "--out", path("bad_method"), "--base", p.base_ckpt(), "--method", "ppo"}) == kExitConfig);

  write_file(path("garbage.ckpt"), "not a checkpoint");
  CHECK(run({"sample", "--out", path("garbage"), "--policy", path("garbage.ckpt")}, &log) == kExitRuntime);
  CHECK(log.find("CheckpointError") != std::string::npos);
  CHECK(run({"sample", "--out", path("digest"), "--policy", p.base_ckpt(), "--policy_digest=00"}, &log) ==
        kExitRuntime);
  CHECK(log.find("DigestMismatch") != std::string::npos);
}

TEST_CASE("the installed binary maps failures to exit codes") {
  const char* bin = std::getenv("KDPG_BIN");
  if (!bin) return;
  auto status = [&](const std::string& args) {
    const int raw = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--version") == 0);
  CHECK(status("gen-corpus") == 2);
  CHECK(status("sample --out " + path("bin_missing") + " --policy " + path("garbage.ckpt")) == 1);
  CHECK(status("gen-corpus --config " + small_config() + " --out " + path("bin_ok")) == 0);
}
