#include "kdpg/corpus.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <cmath>
#include <set>

#include "kdpg/compile.hpp"
#include "kdpg/io.hpp"

namespace kdpg {

namespace {

void check_probability(double p, const char* name) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    throw ConfigError(std::string(name) + " must lie in [0, 1]");
  }
}

void check_weights(const std::vector<double>& w, const char* name) {
  double total = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) throw ConfigError(std::string(name) + " has a bad weight");
    total += x;
  }
  if (!w.empty() && total <= 0.0) throw ConfigError(std::string(name) + " is not normalizable");
}

std::vector<TokenId> ids_of_kind(const Vocab& vocab, TokenKind kind) {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab.kind(static_cast<TokenId>(i)) == kind) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

bool bernoulli(Rng& rng, double p) { return p > 0.0 && uniform01(rng) < p; }

// Grammar walker. Emits body tokens; aborts once the program cannot fit.
class Generator {
 public:
  Generator(Rng& rng, const Vocab& vocab, const GenConfig& cfg)
      : rng_(rng),
        cfg_(cfg),
        idents_(ids_of_kind(vocab, TokenKind::Ident)),
        nums_(ids_of_kind(vocab, TokenKind::Num)),
        add_ops_(ids_of_kind(vocab, TokenKind::AddOp)),
        mul_ops_(ids_of_kind(vocab, TokenKind::MulOp)) {
    assign_ = vocab.id("=");
    semi_ = vocab.id(";");
    if (cfg.factor_paren > 0.0 && cfg.max_depth > 1) {
      lparen_ = vocab.id("(");
      rparen_ = vocab.id(")");
    }
    if (idents_.empty()) throw ConfigError("vocabulary has no identifiers");
  }

  std::vector<TokenId> program() {
    out_.clear();
    int n = 0;
    do {
      statement();
      ++n;
    } while (n < cfg_.max_statements && bernoulli(rng_, cfg_.stmt_continue) && fits());
    return out_;
  }

 private:
  bool fits() const { return out_.size() + 2 <= cfg_.max_len; }

  TokenId pick(const std::vector<TokenId>& ids, const std::vector<double>& weights) {
    if (ids.empty()) throw ConfigError("grammar needs a token kind the vocabulary lacks");
    if (weights.size() != ids.size()) {
      return ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng_)];
    }
    std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
    return ids[d(rng_)];
  }

  void statement() {
    target_ = pick(idents_, cfg_.ident_weights);
    out_.push_back(target_);
    out_.push_back(assign_);
    expr(1);
    out_.push_back(semi_);
  }

  void expr(int depth) {
    term(depth);
    while (fits() && !add_ops_.empty() && bernoulli(rng_, cfg_.add_continue)) {
      out_.push_back(pick(add_ops_, cfg_.add_op_weights));
      term(depth);
    }
  }

  void term(int depth) {
    factor(depth);
    while (fits() && !mul_ops_.empty() && bernoulli(rng_, cfg_.mul_continue)) {
      out_.push_back(pick(mul_ops_, cfg_.mul_op_weights));
      factor(depth);
    }
  }

  void factor(int depth) {
    const bool paren_ok = depth < cfg_.max_depth && lparen_.has_value();
    const bool num_ok = !nums_.empty();
    std::array<double, 3> w = {num_ok ? cfg_.factor_num : 0.0, cfg_.factor_ident,
                               paren_ok ? cfg_.factor_paren : 0.0};
    if (w[0] + w[1] + w[2] <= 0.0) w = {num_ok ? 1.0 : 0.0, num_ok ? 0.0 : 1.0, 0.0};
    std::discrete_distribution<int> d(w.begin(), w.end());
    switch (d(rng_)) {
      case 0: out_.push_back(pick(nums_, cfg_.num_weights)); break;
      case 1:
        out_.push_back(bernoulli(rng_, cfg_.reuse_target) ? target_
                                                          : pick(idents_, cfg_.ident_weights));
        break;
      default:
        out_.push_back(*lparen_);
        expr(depth + 1);
        out_.push_back(*rparen_);
    }
  }

  Rng& rng_;
  const GenConfig& cfg_;
  std::vector<TokenId> idents_, nums_, add_ops_, mul_ops_;
  TokenId assign_{}, semi_{};
  std::optional<TokenId> lparen_, rparen_;
  TokenId target_{};
  std::vector<TokenId> out_;
};

}  // namespace

void GenConfig::validate() const {
  if (max_statements < 1) throw ConfigError("max_statements must be >= 1");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (max_len < 3) throw ConfigError("max_len must be >= 3");
  check_probability(stmt_continue, "stmt_continue");
  check_probability(add_continue, "add_continue");
  check_probability(mul_continue, "mul_continue");
  check_probability(reuse_target, "reuse_target");
  check_probability(p_corrupt, "p_corrupt");
  check_weights({factor_num, factor_ident, factor_paren}, "factor weights");
  check_weights(ident_weights, "ident_weights");
  check_weights(num_weights, "num_weights");
  check_weights(add_op_weights, "add_op_weights");
  check_weights(mul_op_weights, "mul_op_weights");
  if (p_corrupt > 0.0 && !ops.any()) throw ConfigError("p_corrupt > 0 needs an enabled corruption op");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
}

nlohmann::json to_json(const GenConfig& c) {
  return {
      {"seed", c.seed},
      {"max_statements", c.max_statements},
      {"max_depth", c.max_depth},
      {"max_len", c.max_len},
      {"stmt_continue", c.stmt_continue},
      {"add_continue", c.add_continue},
      {"mul_continue", c.mul_continue},
      {"factor_num", c.factor_num},
      {"factor_ident", c.factor_ident},
      {"factor_paren", c.factor_paren},
      {"ident_weights", c.ident_weights},
      {"num_weights", c.num_weights},
      {"add_op_weights", c.add_op_weights},
      {"mul_op_weights", c.mul_op_weights},
      {"reuse_target", c.reuse_target},
      {"p_corrupt", c.p_corrupt},
      {"ops",
       {{"drop", c.ops.drop},
        {"duplicate", c.ops.duplicate},
        {"substitute", c.ops.substitute},
        {"swap", c.ops.swap}}},
      {"max_retries", c.max_retries},
  };
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_statements = j.at("max_statements").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.stmt_continue = j.at("stmt_continue").get<double>();
  c.add_continue = j.at("add_continue").get<double>();
  c.mul_continue = j.at("mul_continue").get<double>();
  c.factor_num = j.at("factor_num").get<double>();
  c.factor_ident = j.at("factor_ident").get<double>();
  c.factor_paren = j.at("factor_paren").get<double>();
  c.ident_weights = j.at("ident_weights").get<std::vector<double>>();
  c.num_weights = j.at("num_weights").get<std::vector<double>>();
  c.add_op_weights = j.at("add_op_weights").get<std::vector<double>>();
  c.mul_op_weights = j.at("mul_op_weights").get<std::vector<double>>();
  c.reuse_target = j.at("reuse_target").get<double>();
  c.p_corrupt = j.at("p_corrupt").get<double>();
  const auto& ops = j.at("ops");
  c.ops = {ops.at("drop").get<bool>(), ops.at("duplicate").get<bool>(),
           ops.at("substitute").get<bool>(), ops.at("swap").get<bool>()};
  c.max_retries = j.at("max_retries").get<int>();
  return c;
}

TokenSeq generate_program(Rng& rng, const Vocab& vocab, const GenConfig& config) {
  Generator gen(rng, vocab, config);
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    std::vector<TokenId> b = gen.program();
    if (b.size() + 2 <= config.max_len) return make_seq(vocab, b);
  }
  throw Error("RetriesExhausted",
              "no program fit max_len after " + std::to_string(config.max_retries) + " attempts");
}

TokenSeq apply_corruption(Rng& rng, const Vocab& vocab, const TokenSeq& seq, CorruptionOp op,
                          std::size_t body_index, std::size_t max_len) {
  const bool terminated = ends_with_eos(vocab, seq);
  const std::size_t body_len = seq.size() - 1 - (terminated ? 1 : 0);
  if (body_len == 0 || body_index >= body_len) return seq;
  TokenSeq out = seq;
  auto& ids = out.ids;
  const std::size_t at = body_index + 1;
  switch (op) {
    case CorruptionOp::Drop: ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(at)); break;
    case CorruptionOp::Duplicate:
      if (ids.size() < max_len) ids.insert(ids.begin() + static_cast<std::ptrdiff_t>(at), ids[at]);
      break;
    case CorruptionOp::Substitute: {
      std::vector<TokenId> choices;
      for (TokenId t : vocab.body_ids()) {
        if (t != ids[at]) choices.push_back(t);
      }
      if (!choices.empty()) {
        ids[at] = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
      }
      break;
    }
    case CorruptionOp::Swap:
      // Pairs (i, i+1) within the body; the last body position pairs with
      // its left neighbour.
      if (body_len >= 2) {
        std::size_t left = body_index + 1 < body_len ? at : at - 1;
        std::swap(ids[left], ids[left + 1]);
      }
      break;
  }
  return out;
}

TokenSeq corrupt(Rng& rng, const Vocab& vocab, const TokenSeq& seq, const GenConfig& config) {
  std::vector<CorruptionOp> enabled;
  if (config.ops.drop) enabled.push_back(CorruptionOp::Drop);
  if (config.ops.duplicate) enabled.push_back(CorruptionOp::Duplicate);
  if (config.ops.substitute) enabled.push_back(CorruptionOp::Substitute);
  if (config.ops.swap) enabled.push_back(CorruptionOp::Swap);
  if (enabled.empty()) throw ConfigError("no corruption op enabled");
  CorruptionOp op = enabled[std::uniform_int_distribution<std::size_t>(0, enabled.size() - 1)(rng)];
  const std::size_t body_len = body(vocab, seq).size();
  if (body_len == 0) return seq;
  std::size_t index = std::uniform_int_distribution<std::size_t>(0, body_len - 1)(rng);
  return apply_corruption(rng, vocab, seq, op, index, config.max_len);
}

Dataset build_dataset(const Vocab& vocab, const GenConfig& config, std::size_t n_train,
                      std::size_t n_test) {
  if (n_train == 0 || n_test == 0) throw ConfigError("n_train and n_test must be > 0");
  config.validate();
  Dataset data;
  data.vocab = vocab;
  data.config = config;
  const std::size_t wanted = n_train + n_test;
  const std::size_t budget = 50 * wanted + 1000;

  std::set<TokenSeq> seen;
  std::vector<TokenSeq> items;
  items.reserve(wanted);
  std::size_t index = 0;
  for (; items.size() < wanted && index < budget; ++index) {
    Rng rng = substream(config.seed, {index});
    TokenSeq seq = generate_program(rng, vocab, config);
    bool corrupted = false;
    if (bernoulli(rng, config.p_corrupt)) {
      seq = corrupt(rng, vocab, seq, config);
      corrupted = true;
    }
    if (seen.insert(seq).second) {
      items.push_back(std::move(seq));
      data.corrupted += corrupted ? 1 : 0;
    }
  }
  data.items_generated = index;
  if (items.size() < wanted) {
    throw Error("RetriesExhausted", "only " + std::to_string(items.size()) +
                                        " unique programs after " + std::to_string(index) +
                                        " draws; wanted " + std::to_string(wanted));
  }
  data.train.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
  data.test.assign(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  return data;
}

std::string format_programs(const Vocab& vocab, const std::vector<TokenSeq>& programs) {
  std::string out;
  for (const auto& p : programs) {
    out += detokenize(vocab, p);
    out += '\n';
  }
  return out;
}

std::vector<TokenSeq> parse_programs(const Vocab& vocab, const std::string& text) {
  std::vector<TokenSeq> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    out.push_back(tokenize(vocab, std::string_view(text).substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

std::string Dataset::content_digest() const {
  return sha256_hex(format_programs(vocab, train) + format_programs(vocab, test));
}

nlohmann::json Dataset::manifest() const {
  std::size_t compilable = 0;
  for (const auto* split : {&train, &test}) {
    for (const auto& s : *split) compilable += compile_check(vocab, s).ok ? 1 : 0;
  }
  return {
      {"seed", config.seed},
      {"config", to_json(config)},
      {"vocab", std::vector<std::string>(vocab.surfaces().begin(), vocab.surfaces().end())},
      {"counts",
       {{"train", train.size()},
        {"test", test.size()},
        {"items_generated", items_generated},
        {"corrupted", corrupted},
        {"compilable", compilable}}},
      {"digest", content_digest()},
  };
}

std::vector<std::filesystem::path> save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths = {dir / "train.txt", dir / "test.txt", dir / "dataset.json"};
  write_file(paths[0], format_programs(data.vocab, data.train));
  write_file(paths[1], format_programs(data.vocab, data.test));
  write_file(paths[2], data.manifest().dump(2) + "\n");
  return paths;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  auto manifest = nlohmann::json::parse(read_file(dir / "dataset.json"));
  Dataset data;
  data.vocab = Vocab(manifest.at("vocab").get<std::vector<std::string>>());
  data.config = gen_config_from_json(manifest.at("config"));
  data.train = parse_programs(data.vocab, read_file(dir / "train.txt"));
  data.test = parse_programs(data.vocab, read_file(dir / "test.txt"));
  data.items_generated = manifest.at("counts").at("items_generated").get<std::size_t>();
  data.corrupted = manifest.at("counts").at("corrupted").get<std::size_t>();
  if (data.content_digest() != manifest.at("digest").get<std::string>()) {
    throw Error("DigestMismatch", "dataset files in " + dir.string() + " do not match dataset.json");
  }
  return data;
}

}  // namespace kdpg
