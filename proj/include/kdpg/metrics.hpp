#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdpg/compile.hpp"
#include "kdpg/ebm.hpp"

namespace kdpg {

/// Samples drawn from one policy. BOS/EOS never count towards any metric.
struct SampleSet {
  std::vector<TokenSeq> samples;
  std::uint64_t seed = 0;
  std::string tag;
};

SampleSet draw_samples(const Policy& policy, std::size_t n, std::uint64_t seed, std::size_t max_len,
                       std::string tag = {});

/// Fraction of samples with b(x) = 1.
double compilability_rate(const std::vector<TokenSeq>& samples, const Scorer& b);

/// Per-sample distinct/total body tokens, averaged over samples with a
/// nonempty body. Empty bodies are skipped and counted in `skipped`.
/// Throws kdpg::Error("AllSamplesEmpty").
double distinct1(const Vocab& vocab, const std::vector<TokenSeq>& samples,
                 std::size_t* skipped = nullptr);

/// Mean BLEU of each sample against all other samples as references:
/// clipped n-gram precisions for n = 1..min(max_n, length), uniform
/// weights, no smoothing, brevity penalty from the closest reference length
/// (ties to the shorter). Empty-bodied samples take no part. Throws
/// kdpg::Error("TooFewSamples") with fewer than two nonempty samples.
double self_bleu(const Vocab& vocab, const std::vector<TokenSeq>& samples, std::size_t max_n = 5);

inline double self_bleu5(const Vocab& vocab, const std::vector<TokenSeq>& samples) {
  return self_bleu(vocab, samples, 5);
}

/// exp(-(1/N) sum log policy(x)); N counts predicted tokens incl. EOS.
double perplexity(const Policy& policy, const std::vector<TokenSeq>& test);

double mean_char_length(const Vocab& vocab, const std::vector<TokenSeq>& samples);

/// Mean AST node count over compilable samples only. Throws
/// kdpg::Error("NoCompilableSamples").
double mean_ast_nodes(const Vocab& vocab, const std::vector<TokenSeq>& samples);

struct LintRate {
  double per_char = 0.0;   // violations / characters of detokenized text
  double per_token = 0.0;  // violations / body tokens
  std::size_t violations = 0;
};

LintRate lint_rate(const Vocab& vocab, const std::vector<TokenSeq>& samples);

using ErrorHistogram = std::map<ErrorKind, double>;

/// Fraction of all samples failing with each category (all five present).
ErrorHistogram error_histogram(const Vocab& vocab, const std::vector<TokenSeq>& samples);

struct RankCount {
  std::size_t rank;
  TokenId token;
  std::size_t count;
};

/// Body-token counts by descending count, ties by ascending id.
std::vector<RankCount> token_rank_frequency(const Vocab& vocab, const std::vector<TokenSeq>& samples);

/// Category frequencies over `repeats` independent sample sets with a
/// two-sided 95% Student-t half-width.
struct HistogramInterval {
  double mean = 0.0;
  double half_width = 0.0;
};
using RepeatedHistogram = std::map<ErrorKind, HistogramInterval>;

struct RepeatedErrors {
  RepeatedHistogram categories;
  HistogramInterval total;  // 1 - compilability
};

RepeatedErrors error_histogram_repeats(const Policy& policy, std::size_t n, std::size_t repeats,
                                       std::uint64_t seed, std::size_t max_len);

/// One evaluation snapshot. Metrics that could not be computed are absent
/// and explained in `failures`.
struct MetricsRecord {
  std::optional<double> compilability_rate;
  std::optional<double> forward_kl;
  std::optional<double> reverse_kl;
  std::optional<double> distinct1;
  std::optional<double> self_bleu5;
  std::optional<double> perplexity;
  std::optional<double> mean_char_length;
  std::optional<double> mean_ast_nodes;
  std::optional<double> lint_rate;
  std::optional<double> lint_rate_per_token;
  ErrorHistogram error_histogram;
  std::vector<RankCount> rank_frequency;
  std::map<std::string, std::string> failures;

  /// Stable CSV column names, matching csv_row().
  static std::vector<std::string> csv_header();
  std::vector<std::string> csv_row() const;
  nlohmann::json to_json(const Vocab& vocab) const;
};

struct EvalOptions {
  std::size_t n_samples = 1024;
  std::size_t max_len = kDefaultMaxLen;
  /// Self-BLEU-5 runs on the first min(n_samples, self_bleu_samples) samples.
  std::size_t self_bleu_samples = 256;
  /// Forward KL: exact enumeration when feasible and requested; otherwise
  /// importance sampling from `proposal` (the base model when null) with
  /// `z` (estimated from the same proposal batch when absent).
  bool exact = false;
  const Policy* proposal = nullptr;
  std::optional<PartitionEstimate> z;
  /// Skips the forward-KL estimate and records this value instead.
  std::optional<double> forward_kl;
};

/// Draws one sample set from `policy` and fills every MetricsRecord field.
MetricsRecord evaluate(const Policy& policy, const Ebm& ebm, const std::vector<TokenSeq>& test,
                       const EvalOptions& options, std::uint64_t seed);

/// Per-metric CSV helpers for plotting.
std::string error_histogram_csv(const ErrorHistogram& h);
std::string rank_frequency_csv(const Vocab& vocab, const std::vector<RankCount>& rf);

}  // namespace kdpg
