#include "kdpg/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "kdpg/checkpoint.hpp"
#include "kdpg/config.hpp"
#include "kdpg/corpus.hpp"
#include "kdpg/ebm.hpp"
#include "kdpg/external_check.hpp"
#include "kdpg/io.hpp"
#include "kdpg/lint.hpp"
#include "kdpg/metrics.hpp"
#include "kdpg/tiny.hpp"
#include "kdpg/train.hpp"
#include "kdpg/tuning.hpp"

namespace fs = std::filesystem;

namespace kdpg {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed", "max_len", "data", "base", "policy", "base_digest", "policy_digest",
      "lang.vocab", "lang.checker", "lang.checker_timeout_ms",
      "corpus.n_train", "corpus.n_test", "corpus.max_statements", "corpus.max_depth",
      "corpus.stmt_continue", "corpus.add_continue", "corpus.mul_continue", "corpus.factor_num",
      "corpus.factor_ident", "corpus.factor_paren", "corpus.ident_weights", "corpus.num_weights",
      "corpus.add_op_weights", "corpus.mul_op_weights", "corpus.reuse_target", "corpus.p_corrupt",
      "corpus.ops", "corpus.max_retries",
      "model.arch", "model.context", "model.embed", "model.hidden", "model.order", "model.init_scale",
      "train.lr", "train.batch", "train.epochs", "train.beta1", "train.beta2", "train.epsilon",
      "tune.method", "tune.lr", "tune.batch", "tune.updates", "tune.warmup", "tune.eval_interval",
      "tune.eval_samples", "tune.self_bleu_samples", "tune.optimizer", "tune.clip_norm",
      "tune.reward_baseline", "tune.exact", "tune.beta1", "tune.beta2", "tune.epsilon",
      "eval.samples", "eval.self_bleu_samples", "eval.repeats", "eval.exact",
      "sample.n", "sample.prompt",
      "exact.max_len"};
  return keys;
}

// ---------------------------------------------------------------------------
// Output directory bookkeeping and the run manifest.

class RunDir {
 public:
  RunDir(fs::path dir, bool force) : dir_(std::move(dir)) {
    if (fs::exists(dir_) && !fs::is_directory(dir_)) {
      throw ConfigError("output path " + dir_.string() + " is not a directory");
    }
    if (fs::exists(dir_) && !fs::is_empty(dir_)) {
      if (!force) {
        throw ConfigError("output directory " + dir_.string() + " is not empty (use --force)");
      }
      clear_previous_run();
    }
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, std::string_view bytes) {
    write_file(dir_ / name, bytes);
    add_output(dir_ / name);
  }

  void add_output(const fs::path& path) {
    outputs_.push_back({fs::relative(path, dir_).generic_string(), file_sha256(path)});
  }

  void add_input(const std::string& role, const fs::path& path) {
    inputs_.push_back({{"role", role}, {"path", path.string()}, {"sha256", file_sha256(path)}});
  }

  void finish(const std::string& subcommand, const Config& cfg, std::uint64_t seed, double seconds,
              nlohmann::json extra) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& [path, digest] : outputs_) outputs.push_back({{"path", path}, {"sha256", digest}});
    nlohmann::json m = {{"subcommand", subcommand},
                        {"version", kVersion},
                        {"seed", seed},
                        {"config", cfg.to_json()},
                        {"inputs", inputs_},
                        {"outputs", outputs},
                        {"wall_clock_seconds", seconds}};
    if (!extra.is_null()) m["run"] = std::move(extra);
    write_file(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  // --force only removes what an earlier run recorded; anything else in the
  // directory is left alone and blocks the run.
  void clear_previous_run() {
    const fs::path manifest = dir_ / "manifest.json";
    std::set<fs::path> owned = {manifest};
    if (fs::exists(manifest)) {
      try {
        const auto j = nlohmann::json::parse(read_file(manifest));
        for (const auto& o : j.at("outputs")) owned.insert(dir_ / o.at("path").get<std::string>());
      } catch (const std::exception&) {
        throw ConfigError("cannot read " + manifest.string() + " to clear the previous run");
      }
    }
    for (const auto& entry : fs::recursive_directory_iterator(dir_)) {
      if (entry.is_regular_file() && !owned.count(entry.path())) {
        throw ConfigError("output directory contains " + entry.path().string() +
                          ", which no earlier run produced; refusing to clear it");
      }
    }
    for (const auto& p : owned) fs::remove(p);
  }

  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> outputs_;
  nlohmann::json inputs_ = nlohmann::json::array();
};

// ---------------------------------------------------------------------------
// Config -> domain objects.

Vocab vocab_from(const Config& cfg) {
  const auto tokens = cfg.get_list("lang.vocab");
  return tokens.empty() ? Vocab::minilang() : Vocab(tokens);
}

std::size_t max_len_from(const Config& cfg) { return cfg.get_size("max_len", kDefaultMaxLen); }

GenConfig gen_from(const Config& cfg) {
  GenConfig g;
  g.seed = cfg.get_u64("seed", g.seed);
  g.max_len = max_len_from(cfg);
  g.max_statements = static_cast<int>(cfg.get_size("corpus.max_statements", g.max_statements));
  g.max_depth = static_cast<int>(cfg.get_size("corpus.max_depth", g.max_depth));
  g.stmt_continue = cfg.get_double("corpus.stmt_continue", g.stmt_continue);
  g.add_continue = cfg.get_double("corpus.add_continue", g.add_continue);
  g.mul_continue = cfg.get_double("corpus.mul_continue", g.mul_continue);
  g.factor_num = cfg.get_double("corpus.factor_num", g.factor_num);
  g.factor_ident = cfg.get_double("corpus.factor_ident", g.factor_ident);
  g.factor_paren = cfg.get_double("corpus.factor_paren", g.factor_paren);
  g.ident_weights = cfg.get_doubles("corpus.ident_weights");
  g.num_weights = cfg.get_doubles("corpus.num_weights");
  g.add_op_weights = cfg.get_doubles("corpus.add_op_weights");
  g.mul_op_weights = cfg.get_doubles("corpus.mul_op_weights");
  g.reuse_target = cfg.get_double("corpus.reuse_target", g.reuse_target);
  g.p_corrupt = cfg.get_double("corpus.p_corrupt", g.p_corrupt);
  g.max_retries = static_cast<int>(cfg.get_size("corpus.max_retries", g.max_retries));
  if (cfg.has("corpus.ops")) {
    g.ops = {false, false, false, false};
    for (const auto& op : cfg.get_list("corpus.ops")) {
      if (op == "drop") g.ops.drop = true;
      else if (op == "duplicate") g.ops.duplicate = true;
      else if (op == "substitute") g.ops.substitute = true;
      else if (op == "swap") g.ops.swap = true;
      else throw ConfigError("unknown corruption op '" + op + "'");
    }
  }
  g.validate();
  return g;
}

Policy init_policy(const Config& cfg, const Vocab& vocab, std::uint64_t seed) {
  const std::string arch = cfg.get_string("model.arch", "neural");
  const double scale = cfg.get_double("model.init_scale", 1.0);
  if (arch == "neural") {
    NeuralShape s;
    s.context = cfg.get_size("model.context", s.context);
    s.embed = cfg.get_size("model.embed", s.embed);
    s.hidden = cfg.get_size("model.hidden", s.hidden);
    if (s.context < 1 || s.embed < 1 || s.hidden < 1) throw ConfigError("model sizes must be >= 1");
    return Policy::neural(vocab, s, seed, scale);
  }
  if (arch == "tabular") {
    const std::size_t order = cfg.get_size("model.order", 2);
    if (order < 1) throw ConfigError("model.order must be >= 1");
    return Policy::tabular(vocab, order, seed, scale);
  }
  throw ConfigError("model.arch must be neural or tabular");
}

AdamConfig adam_from(const Config& cfg, const std::string& section) {
  AdamConfig a;
  a.beta1 = cfg.get_double(section + ".beta1", a.beta1);
  a.beta2 = cfg.get_double(section + ".beta2", a.beta2);
  a.epsilon = cfg.get_double(section + ".epsilon", a.epsilon);
  return a;
}

Scorer scorer_from(const Config& cfg, const Vocab& vocab) {
  const auto cmd = cfg.get_optional("lang.checker");
  if (!cmd) return compile_scorer(vocab);
  std::vector<std::string> argv;
  std::istringstream in(*cmd);
  for (std::string w; in >> w;) argv.push_back(w);
  if (argv.empty()) throw ConfigError("lang.checker is empty");
  const auto timeout = std::chrono::milliseconds(cfg.get_size("lang.checker_timeout_ms", 5000));
  return [argv, vocab, timeout](const TokenSeq& seq) { return external_check(argv, vocab, seq, timeout).ok; };
}

fs::path required_path(const Config& cfg, const std::string& key) {
  const auto v = cfg.get_optional(key);
  if (!v || v->empty()) throw ConfigError("missing required input '" + key + "' (use --" + key + ")");
  if (!fs::exists(*v)) throw ConfigError("input '" + key + "' does not exist: " + *v);
  return *v;
}

// Loads a checkpoint, checking its digest when `<key>_digest` is configured.
Policy load_checked(const Config& cfg, const std::string& key, RunDir& run) {
  const fs::path path = required_path(cfg, key);
  if (const auto want = cfg.get_optional(key + "_digest")) {
    const std::string got = file_sha256(path);
    if (got != *want) throw Error("DigestMismatch", path.string() + " has digest " + got);
  }
  run.add_input(key, path);
  return load_policy(path);
}

Dataset load_data(const Config& cfg, RunDir& run) {
  const fs::path dir = required_path(cfg, "data");
  Dataset d = load_dataset(dir);
  for (const char* f : {"train.txt", "test.txt", "dataset.json"}) run.add_input("data", dir / f);
  return d;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns the manifest's run-specific block.

nlohmann::json cmd_gen_corpus(const Config& cfg, RunDir& run) {
  const Vocab vocab = vocab_from(cfg);
  const GenConfig g = gen_from(cfg);
  const std::size_t n_train = cfg.get_size("corpus.n_train", 9000);
  const std::size_t n_test = cfg.get_size("corpus.n_test", 1000);
  if (n_train == 0 || n_test == 0) throw ConfigError("corpus.n_train and corpus.n_test must be > 0");
  const Dataset d = build_dataset(vocab, g, n_train, n_test);
  for (const auto& p : save_dataset(d, run.dir())) run.add_output(p);
  return {{"train", d.train.size()}, {"test", d.test.size()}, {"digest", d.content_digest()}};
}

nlohmann::json cmd_train_base(const Config& cfg, RunDir& run, std::ostream& log) {
  const Dataset d = load_data(cfg, run);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  MleConfig mle;
  mle.learning_rate = cfg.get_double("train.lr", mle.learning_rate);
  mle.batch_size = cfg.get_size("train.batch", mle.batch_size);
  mle.epochs = cfg.get_size("train.epochs", mle.epochs);
  mle.seed = seed;
  mle.adam = adam_from(cfg, "train");
  Policy init = init_policy(cfg, d.vocab, seed);
  const double ppl_init = d.test.empty() ? NAN : perplexity(init, d.test);
  TrainResult r = train_base(d.train, std::move(init), mle);
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
    csv += std::to_string(e + 1) + "," + fmt(r.epoch_loss[e]) + "\n";
    log << "epoch " << e + 1 << " loss " << fmt(r.epoch_loss[e]) << "\n";
  }
  save_policy(r.policy, run.dir() / "policy.ckpt");
  run.add_output(run.dir() / "policy.ckpt");
  run.write("train_log.csv", csv);
  const double ppl = d.test.empty() ? NAN : perplexity(r.policy, d.test);
  return {{"perplexity_init", ppl_init}, {"perplexity", ppl}, {"parameters", r.policy.num_params()}};
}

TuneConfig tune_from(const Config& cfg) {
  TuneConfig t;
  t.method = method_from_string(cfg.get_string("tune.method", "kldpg"));
  t.learning_rate = cfg.get_double("tune.lr", t.learning_rate);
  t.batch_size = cfg.get_size("tune.batch", t.batch_size);
  t.updates = cfg.get_size("tune.updates", t.updates);
  t.warmup = cfg.get_size("tune.warmup", t.warmup);
  t.eval_interval = cfg.get_size("tune.eval_interval", t.eval_interval);
  t.eval_samples = cfg.get_size("tune.eval_samples", t.eval_samples);
  t.self_bleu_samples = cfg.get_size("tune.self_bleu_samples", t.self_bleu_samples);
  t.seed = cfg.get_u64("seed", t.seed);
  t.max_len = max_len_from(cfg);
  t.optimizer = optimizer_from_string(cfg.get_string("tune.optimizer", "adam"));
  t.adam = adam_from(cfg, "tune");
  t.clip_norm = cfg.get_double("tune.clip_norm", t.clip_norm);
  t.reward_baseline = cfg.get_bool("tune.reward_baseline", t.reward_baseline);
  t.exact = cfg.get_bool("tune.exact", t.exact);
  t.validate();
  return t;
}

std::string updates_csv(const TuneTrace& trace) {
  std::string out = "update,learning_rate,mean_weight,grad_norm,clipped\n";
  for (const auto& u : trace.updates) {
    out += std::to_string(u.update) + "," + fmt(u.learning_rate) + "," + fmt(u.mean_weight) + "," +
           fmt(u.grad_norm) + "," + (u.clipped ? "1" : "0") + "\n";
  }
  return out;
}

nlohmann::json cmd_tune(const Config& cfg, RunDir& run, std::ostream& log) {
  const TuneConfig tc = tune_from(cfg);
  const Policy base = load_checked(cfg, "base", run);
  std::vector<TokenSeq> test;
  if (cfg.has("data")) test = load_data(cfg, run).test;
  const Ebm ebm(base, scorer_from(cfg, base.vocab()));
  const TuneResult r = tune(ebm, tc, test, [&](const EvalPoint& e) {
    log << to_string(tc.method) << " update " << e.update << " compilability "
        << fmt(e.metrics.compilability_rate.value_or(NAN)) << " forward_kl "
        << fmt(e.metrics.forward_kl.value_or(NAN)) << (e.swapped ? " (proposal swapped)" : "") << "\n";
  });
  save_policy(r.policy, run.dir() / "policy.ckpt");
  run.add_output(run.dir() / "policy.ckpt");
  run.write("trace.csv", r.trace.to_csv());
  run.write("updates.csv", updates_csv(r.trace));
  nlohmann::json extra = {{"tune", tc.to_json()},
                          {"clip_events", r.trace.clip_events},
                          {"swap_updates", r.trace.swap_updates},
                          {"evaluations", r.trace.evals.size()}};
  if (r.trace.aborted) extra["aborted"] = *r.trace.aborted;
  return extra;
}

std::string repeats_csv(const RepeatedErrors& rep) {
  std::string out = "category,mean,half_width\n";
  for (const auto& [kind, iv] : rep.categories) {
    out += std::string(to_string(kind)) + "," + fmt(iv.mean) + "," + fmt(iv.half_width) + "\n";
  }
  out += "total," + fmt(rep.total.mean) + "," + fmt(rep.total.half_width) + "\n";
  return out;
}

nlohmann::json cmd_evaluate(const Config& cfg, RunDir& run) {
  const Policy policy = load_checked(cfg, "policy", run);
  const Policy base = cfg.has("base") ? load_checked(cfg, "base", run) : policy;
  if (!policy.vocab().operator==(base.vocab())) throw ConfigError("policy and base vocabularies differ");
  std::vector<TokenSeq> test;
  if (cfg.has("data")) test = load_data(cfg, run).test;
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const Ebm ebm(base, scorer_from(cfg, base.vocab()));
  EvalOptions o;
  o.n_samples = cfg.get_size("eval.samples", o.n_samples);
  o.self_bleu_samples = cfg.get_size("eval.self_bleu_samples", o.self_bleu_samples);
  o.max_len = max_len_from(cfg);
  o.exact = cfg.get_bool("eval.exact", false);
  if (o.n_samples < 2) throw ConfigError("eval.samples must be >= 2");
  const MetricsRecord rec = evaluate(policy, ebm, test, o, seed);
  const std::size_t repeats = cfg.get_size("eval.repeats", 3);
  run.write("metrics.json", rec.to_json(policy.vocab()).dump(2) + "\n");
  std::string csv;
  const auto header = MetricsRecord::csv_header();
  const auto row = rec.csv_row();
  for (std::size_t i = 0; i < header.size(); ++i) csv += (i ? "," : "") + header[i];
  csv += "\n";
  for (std::size_t i = 0; i < row.size(); ++i) csv += (i ? "," : "") + row[i];
  run.write("metrics.csv", csv + "\n");
  run.write("error_histogram.csv", error_histogram_csv(rec.error_histogram));
  run.write("rank_frequency.csv", rank_frequency_csv(policy.vocab(), rec.rank_frequency));
  if (repeats >= 2) {
    run.write("error_repeats.csv",
              repeats_csv(error_histogram_repeats(policy, o.n_samples, repeats, derive_seed(seed, 3), o.max_len)));
  }
  return {{"samples", o.n_samples}, {"repeats", repeats}};
}

nlohmann::json cmd_sample(const Config& cfg, RunDir& run) {
  const Policy policy = load_checked(cfg, "policy", run);
  const Vocab& vocab = policy.vocab();
  const std::size_t n = cfg.get_size("sample.n", 16);
  const std::size_t max_len = max_len_from(cfg);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  std::vector<TokenId> prompt;
  if (const auto p = cfg.get_optional("sample.prompt")) {
    const TokenSeq parsed = tokenize(vocab, *p);
    const auto ids = body(vocab, parsed);
    prompt.assign(ids.begin(), ids.end());
  }
  if (prompt.size() + 2 > max_len) throw ConfigError("prompt does not fit max_len");
  std::string text;
  std::string csv = "index,compiles,error_kind,char_length,ast_nodes\n";
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = substream(seed, {i});
    const TokenSeq x = policy.sample(rng, max_len, prompt);
    const std::string surface = detokenize(vocab, x);
    const CompileResult c = compile_check(vocab, x);
    text += surface + "\n";
    csv += std::to_string(i) + "," + (c.ok ? "1" : "0") + "," +
           (c.error_kind ? std::string(to_string(*c.error_kind)) : std::string()) + "," +
           std::to_string(surface.size()) + "," +
           (c.ok ? std::to_string(ast_node_count(parse(vocab, x))) : std::string()) + "\n";
  }
  run.write("samples.txt", text);
  run.write("samples.csv", csv);
  return {{"samples", n}, {"prompt", cfg.get_string("sample.prompt", "")}};
}

nlohmann::json cmd_enumerate_exact(const Config& cfg, RunDir& run) {
  std::optional<TinySetup> tiny;
  std::optional<Policy> loaded;
  std::size_t max_len = cfg.get_size("exact.max_len", 0);
  if (cfg.has("base")) {
    loaded = load_checked(cfg, "base", run);
    if (max_len == 0) max_len = max_len_from(cfg);
  } else {
    tiny = tiny_setup(cfg.get_u64("seed", 1));
    if (max_len == 0) max_len = tiny->max_len;
  }
  const Policy& base = loaded ? *loaded : tiny->base;
  const Ebm ebm(base, scorer_from(cfg, base.vocab()));
  const ExactDistribution p = exact_p(ebm, max_len);
  double terminated = 0.0;
  enumerate_outcomes(base, max_len, [&](const TokenSeq&, double lp, bool done) {
    if (done) terminated += std::exp(lp);
  });
  if (tiny) {
    save_policy(tiny->base, run.dir() / "base.ckpt");
    run.add_output(run.dir() / "base.ckpt");
  }
  run.write("exact_p.csv", exact_p_csv(base.vocab(), p));
  const nlohmann::json summary = {{"z", p.z},
                                  {"support", p.entries.size()},
                                  {"total_probability", p.total()},
                                  {"terminated_mass", terminated},
                                  {"truncated_mass", 1.0 - terminated},
                                  {"max_len", max_len}};
  run.write("partition.json", summary.dump(2) + "\n");
  return summary;
}

// --- report ---------------------------------------------------------------

struct Trace {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cols;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cols.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cols.push_back(cur);
  return cols;
}

Trace read_trace(const fs::path& path) {
  Trace t;
  t.path = path.string();
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw Error("SchemaMismatch", path.string() + " is empty");
  }
  t.header = split_csv_line(line);
  if (t.header != TuneTrace::csv_header()) {
    throw Error("SchemaMismatch", path.string() + " does not have the trace column schema");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cols = split_csv_line(line);
    if (cols.size() != t.header.size()) {
      throw Error("SchemaMismatch", path.string() + " has a row with " + std::to_string(cols.size()) +
                                        " columns, expected " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cols));
  }
  if (t.rows.empty()) throw Error("SchemaMismatch", path.string() + " has no evaluation rows");
  return t;
}

// +1: higher is better, -1: lower is better, 0: no preferred direction.
int metric_direction(const std::string& m) {
  static const std::map<std::string, int> dir = {
      {"compilability_rate", 1}, {"distinct1", 1},   {"forward_kl", -1}, {"reverse_kl", -1},
      {"self_bleu5", -1},        {"perplexity", -1}, {"lint_rate", -1},  {"lint_rate_per_token", -1},
      {"proposal_kl", -1}};
  if (m.rfind("err_", 0) == 0) return -1;
  const auto it = dir.find(m);
  return it == dir.end() ? 0 : it->second;
}

nlohmann::json cmd_report(const std::vector<std::string>& inputs, RunDir& run) {
  if (inputs.empty()) throw ConfigError("report needs one or more trace CSV files");
  std::vector<Trace> traces;
  for (const auto& p : inputs) {
    if (!fs::exists(p)) throw ConfigError("trace file does not exist: " + p);
    traces.push_back(read_trace(p));
    run.add_input("trace", p);
  }
  const auto& header = traces.front().header;
  std::string long_csv = "method,update,metric,value\n";
  std::string summary = "method,metric,final,best\n";
  std::string table = "| method |";
  std::vector<std::size_t> metric_cols;
  for (std::size_t c = 2; c < header.size(); ++c) metric_cols.push_back(c);
  for (std::size_t c : metric_cols) table += " " + header[c] + " |";
  table += "\n|---|";
  for (std::size_t i = 0; i < metric_cols.size(); ++i) table += "---|";
  table += "\n";
  std::size_t long_rows = 0;
  for (const auto& t : traces) {
    for (const auto& row : t.rows) {
      for (std::size_t c : metric_cols) {
        long_csv += row[0] + "," + row[1] + "," + header[c] + "," + row[c] + "\n";
        ++long_rows;
      }
    }
    const std::string& method = t.rows.front()[0];
    table += "| " + method + " |";
    for (std::size_t c : metric_cols) {
      const std::string& final_value = t.rows.back()[c];
      std::optional<double> best;
      const int d = metric_direction(header[c]);
      for (const auto& row : t.rows) {
        if (row[c].empty() || d == 0) continue;
        const double v = std::stod(row[c]);
        if (!best || (d > 0 ? v > *best : v < *best)) best = v;
      }
      summary += method + "," + header[c] + "," + final_value + "," + (best ? fmt(*best) : "") + "\n";
      table += " " + final_value + " |";
    }
    table += "\n";
  }
  run.write("summary.csv", summary);
  run.write("summary.md", "Final values per method\n\n" + table);
  run.write("long.csv", long_csv);
  return {{"traces", traces.size()}, {"long_rows", long_rows}};
}

// ---------------------------------------------------------------------------

// Leftover "--key=value" / "--key value" / "--flag" arguments become overrides.
void apply_overrides(const std::vector<std::string>& extras, Config& cfg,
                     std::vector<std::string>* positional) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0) {
      if (!positional) throw ConfigError("unexpected argument '" + a + "'");
      positional->push_back(a);
      continue;
    }
    const std::string body = a.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      cfg.set(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      cfg.set(body, extras[++i]);
    } else {
      cfg.set(body, "true");
    }
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& log) {
  CLI::App app{"Constrained generation with KL-adaptive distributional policy gradients", "kdpg"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);

  struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
    bool force = false;
    std::map<std::string, std::string> aliases;  // option value -> config key
  };
  std::map<std::string, Common> common;
  std::map<std::string, CLI::App*> subs;
  const std::vector<std::pair<std::string, std::string>> names = {
      {"gen-corpus", "generate the train/test corpus"},
      {"train-base", "MLE-pretrain the base model a"},
      {"tune", "fine-tune a copy of a (KL-DPG or Reinforce)"},
      {"evaluate", "compute the metric suite for a policy"},
      {"sample", "draw samples, optionally after a prompt"},
      {"enumerate-exact", "exact Z and p by enumeration"},
      {"report", "summarize one or more tuning traces"}};
  std::map<std::string, std::map<std::string, std::string>> alias_values;
  for (const auto& [name, help] : names) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    Common& c = common[name];
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--config", c.config, "key=value configuration file");
    sub->add_option("--out", c.out, "output directory")->required();
    sub->add_flag("--force", c.force, "replace the outputs of an earlier run in --out");
    subs[name] = sub;
  }
  auto alias = [&](const std::string& sub, const std::string& flag, const std::string& key,
                   const std::string& help) {
    subs[sub]->add_option(flag, alias_values[sub][key], help);
  };
  alias("tune", "--method", "tune.method", "kldpg | reinforce-b | reinforce-p");
  alias("tune", "--updates", "tune.updates", "total gradient updates");
  alias("sample", "--prompt", "sample.prompt", "space-separated prompt tokens");
  alias("sample", "-n", "sample.n", "number of samples");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    log << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    log << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
        sub && sub->get_help_ptr() && sub->get_help_ptr()->count() > 0) {
      log << sub->help();
      return kExitOk;
    }
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const Common& c = common[name];
  const auto start = std::chrono::steady_clock::now();
  try {
    Config cfg = c.config.empty() ? Config{} : Config::load(c.config);
    std::vector<std::string> positional;
    apply_overrides(sub->remaining(), cfg, name == "report" ? &positional : nullptr);
    for (const auto& [key, value] : alias_values[name]) {
      if (!value.empty()) cfg.set(key, value);
    }
    if (c.seed) cfg.set("seed", std::to_string(*c.seed));
    cfg.check_known(known_keys());
    const std::uint64_t seed = cfg.get_u64("seed", 1);

    RunDir run(c.out, c.force);
    nlohmann::json extra;
    if (name == "gen-corpus") extra = cmd_gen_corpus(cfg, run);
    else if (name == "train-base") extra = cmd_train_base(cfg, run, log);
    else if (name == "tune") extra = cmd_tune(cfg, run, log);
    else if (name == "evaluate") extra = cmd_evaluate(cfg, run);
    else if (name == "sample") extra = cmd_sample(cfg, run);
    else if (name == "enumerate-exact") extra = cmd_enumerate_exact(cfg, run);
    else extra = cmd_report(positional, run);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.finish(name, cfg, seed, seconds, std::move(extra));
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace kdpg
