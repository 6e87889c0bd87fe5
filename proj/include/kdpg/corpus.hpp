#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdpg/rng.hpp"
#include "kdpg/token_seq.hpp"

namespace kdpg {

struct CorruptionOps {
  bool drop = true;
  bool duplicate = true;
  bool substitute = true;
  bool swap = true;

  bool any() const { return drop || duplicate || substitute || swap; }
};

/// Stochastic MiniLang grammar and the corruption knob.
///
/// Expression depth counts parenthesis nesting levels: the right-hand side
/// of a statement is at depth 1 and a factor may open a parenthesis only
/// below `max_depth`.
struct GenConfig {
  std::uint64_t seed = 1;
  int max_statements = 3;
  int max_depth = 3;
  std::size_t max_len = kDefaultMaxLen;

  // Production weights. Continuation values are probabilities of taking one
  // more repetition of the starred production.
  double stmt_continue = 0.5;
  double add_continue = 0.35;
  double mul_continue = 0.25;
  double factor_num = 0.45;
  double factor_ident = 0.45;
  double factor_paren = 0.10;
  // Terminal choice weights in vocabulary order within each kind; empty
  // means uniform.
  std::vector<double> ident_weights;
  std::vector<double> num_weights;
  std::vector<double> add_op_weights;
  std::vector<double> mul_op_weights;
  // Probability that an expression leaf reuses the statement's target.
  double reuse_target = 0.0;

  double p_corrupt = 0.0;
  CorruptionOps ops;

  int max_retries = 200;

  /// Throws ConfigError when weights are negative, non-finite or not
  /// normalizable, or when p_corrupt is outside [0, 1].
  void validate() const;
};

nlohmann::json to_json(const GenConfig& config);
GenConfig gen_config_from_json(const nlohmann::json& j);

/// One program from the grammar; always compiles and fits max_len.
/// Throws kdpg::Error("RetriesExhausted") when no attempt fits.
TokenSeq generate_program(Rng& rng, const Vocab& vocab, const GenConfig& config);

enum class CorruptionOp { Drop, Duplicate, Substitute, Swap };

/// Applies one uniformly chosen enabled edit at a uniformly chosen body
/// position. Degenerate cases are the identity: swap with fewer than two
/// body tokens, duplicate at max_len, any edit of an empty body.
TokenSeq corrupt(Rng& rng, const Vocab& vocab, const TokenSeq& seq, const GenConfig& config);

/// The same edit at an explicit body index (0-based, BOS excluded).
TokenSeq apply_corruption(Rng& rng, const Vocab& vocab, const TokenSeq& seq, CorruptionOp op,
                          std::size_t body_index, std::size_t max_len);

struct Dataset {
  Vocab vocab = Vocab::minilang();
  GenConfig config;
  std::vector<TokenSeq> train;
  std::vector<TokenSeq> test;
  std::size_t items_generated = 0;  // including discarded duplicates
  std::size_t corrupted = 0;

  std::size_t size() const { return train.size() + test.size(); }
  /// SHA-256 over train.txt followed by test.txt contents.
  std::string content_digest() const;
  nlohmann::json manifest() const;
};

/// Generates unique programs with per-item substreams of config.seed,
/// corrupting each with probability p_corrupt, and splits them in item order.
/// Throws kdpg::Error("RetriesExhausted") when uniqueness cannot be met.
Dataset build_dataset(const Vocab& vocab, const GenConfig& config, std::size_t n_train,
                      std::size_t n_test);

/// One program per line, surface tokens separated by spaces.
std::string format_programs(const Vocab& vocab, const std::vector<TokenSeq>& programs);
std::vector<TokenSeq> parse_programs(const Vocab& vocab, const std::string& text);

/// Writes train.txt, test.txt and dataset.json into `dir`; returns the
/// paths written.
std::vector<std::filesystem::path> save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace kdpg
