#include "kdpg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "kdpg/kl.hpp"
#include "kdpg/lint.hpp"

namespace kdpg {

SampleSet draw_samples(const Policy& policy, std::size_t n, std::uint64_t seed, std::size_t max_len,
                       std::string tag) {
  SampleSet set{{}, seed, std::move(tag)};
  set.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = substream(seed, {i});
    set.samples.push_back(policy.sample(rng, max_len));
  }
  return set;
}

double compilability_rate(const std::vector<TokenSeq>& samples, const Scorer& b) {
  if (samples.empty()) throw ConfigError("compilability rate of an empty sample set");
  std::size_t ok = 0;
  for (const auto& x : samples) ok += b(x) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(samples.size());
}

double distinct1(const Vocab& vocab, const std::vector<TokenSeq>& samples, std::size_t* skipped) {
  double sum = 0.0;
  std::size_t counted = 0;
  std::size_t empty = 0;
  std::vector<bool> seen(vocab.size());
  for (const auto& x : samples) {
    auto b = body(vocab, x);
    if (b.empty()) {
      ++empty;
      continue;
    }
    std::fill(seen.begin(), seen.end(), false);
    std::size_t distinct = 0;
    for (TokenId t : b) {
      if (!seen[t]) {
        seen[t] = true;
        ++distinct;
      }
    }
    sum += static_cast<double>(distinct) / static_cast<double>(b.size());
    ++counted;
  }
  if (skipped) *skipped = empty;
  if (counted == 0) throw Error("AllSamplesEmpty", "no sample has a nonempty body");
  return sum / static_cast<double>(counted);
}

namespace {

// n-grams packed into 64 bits: the order in the top 4 bits, then `bits`
// per token.
struct NgramCodec {
  unsigned bits = 1;
  NgramCodec(std::size_t vocab_size, std::size_t max_n) {
    while ((std::size_t{1} << bits) < vocab_size) ++bits;
    if (max_n > 15 || bits * max_n > 60) throw Error("Unsupported", "n-gram too wide to pack");
  }
  std::uint64_t key(std::span<const TokenId> gram) const {
    std::uint64_t k = 0;
    for (TokenId t : gram) k = (k << bits) | t;
    return k | (static_cast<std::uint64_t>(gram.size()) << 60);
  }
  static std::size_t order(std::uint64_t key) { return static_cast<std::size_t>(key >> 60); }
};

struct TopTwo {
  std::uint32_t best = 0;
  std::size_t best_owner = std::numeric_limits<std::size_t>::max();
  std::uint32_t second = 0;

  void offer(std::uint32_t count, std::size_t owner) {
    if (count > best) {
      second = best;
      best = count;
      best_owner = owner;
    } else if (count > second) {
      second = count;
    }
  }
  std::uint32_t max_excluding(std::size_t owner) const { return owner == best_owner ? second : best; }
};

}  // namespace

double self_bleu(const Vocab& vocab, const std::vector<TokenSeq>& samples, std::size_t max_n) {
  std::vector<std::span<const TokenId>> docs;
  for (const auto& x : samples) {
    auto b = body(vocab, x);
    if (!b.empty()) docs.push_back(b);
  }
  if (docs.size() < 2) throw Error("TooFewSamples", "Self-BLEU needs two nonempty samples");
  const NgramCodec codec(vocab.size(), max_n);

  std::vector<std::unordered_map<std::uint64_t, std::uint32_t>> counts(docs.size());
  std::unordered_map<std::uint64_t, TopTwo> top;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t n = 1; n <= std::min(max_n, docs[i].size()); ++n) {
      for (std::size_t s = 0; s + n <= docs[i].size(); ++s) ++counts[i][codec.key(docs[i].subspan(s, n))];
    }
    for (const auto& [k, c] : counts[i]) top[k].offer(c, i);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::size_t len = docs[i].size();
    const std::size_t order = std::min(max_n, len);
    std::vector<double> matched(order + 1, 0.0);
    for (const auto& [k, c] : counts[i]) {
      const std::size_t gram_n = NgramCodec::order(k);
      matched[gram_n] += std::min(c, top.at(k).max_excluding(i));
    }
    double log_sum = 0.0;
    bool zero = false;
    for (std::size_t n = 1; n <= order; ++n) {
      const double possible = static_cast<double>(len - n + 1);
      if (matched[n] <= 0.0) {
        zero = true;
        break;
      }
      log_sum += std::log(matched[n] / possible);
    }
    if (zero) continue;
    // closest reference length, ties to the shorter
    std::size_t ref_len = 0;
    std::size_t best_diff = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; j < docs.size(); ++j) {
      if (j == i) continue;
      const std::size_t r = docs[j].size();
      const std::size_t diff = r > len ? r - len : len - r;
      if (diff < best_diff || (diff == best_diff && r < ref_len)) {
        best_diff = diff;
        ref_len = r;
      }
    }
    const double bp = len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(len));
    total += bp * std::exp(log_sum / static_cast<double>(order));
  }
  return total / static_cast<double>(docs.size());
}

double perplexity(const Policy& policy, const std::vector<TokenSeq>& test) {
  if (test.empty()) throw ConfigError("perplexity of an empty split");
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& x : test) {
    nll -= policy.logprob(x);
    tokens += x.size() - 1;
  }
  return std::exp(nll / static_cast<double>(tokens));
}

double mean_char_length(const Vocab& vocab, const std::vector<TokenSeq>& samples) {
  if (samples.empty()) throw ConfigError("mean length of an empty sample set");
  double total = 0.0;
  for (const auto& x : samples) total += static_cast<double>(detokenize(vocab, x).size());
  return total / static_cast<double>(samples.size());
}

double mean_ast_nodes(const Vocab& vocab, const std::vector<TokenSeq>& samples) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& x : samples) {
    if (!compile_check(vocab, x).ok) continue;
    total += static_cast<double>(ast_node_count(parse(vocab, x)));
    ++n;
  }
  if (n == 0) throw Error("NoCompilableSamples", "no sample compiles");
  return total / static_cast<double>(n);
}

LintRate lint_rate(const Vocab& vocab, const std::vector<TokenSeq>& samples) {
  if (samples.empty()) throw ConfigError("lint rate of an empty sample set");
  LintRate out;
  std::size_t chars = 0;
  std::size_t tokens = 0;
  for (const auto& x : samples) {
    LintReport r = lint(vocab, x);
    out.violations += r.violations.size();
    tokens += r.tokens_scanned;
    chars += detokenize(vocab, x).size();
  }
  const double v = static_cast<double>(out.violations);
  out.per_char = chars ? v / static_cast<double>(chars) : 0.0;
  out.per_token = tokens ? v / static_cast<double>(tokens) : 0.0;
  return out;
}

ErrorHistogram error_histogram(const Vocab& vocab, const std::vector<TokenSeq>& samples) {
  if (samples.empty()) throw ConfigError("error histogram of an empty sample set");
  ErrorHistogram h;
  for (ErrorKind k : kAllErrorKinds) h[k] = 0.0;
  const double unit = 1.0 / static_cast<double>(samples.size());
  std::map<ErrorKind, std::size_t> counts;
  for (const auto& x : samples) {
    CompileResult r = compile_check(vocab, x);
    if (!r.ok) ++counts[*r.error_kind];
  }
  for (const auto& [k, c] : counts) h[k] = static_cast<double>(c) * unit;
  return h;
}

std::vector<RankCount> token_rank_frequency(const Vocab& vocab, const std::vector<TokenSeq>& samples) {
  std::vector<std::size_t> counts(vocab.size(), 0);
  for (const auto& x : samples) {
    for (TokenId t : body(vocab, x)) ++counts[t];
  }
  std::vector<RankCount> out;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t] > 0) out.push_back({0, static_cast<TokenId>(t), counts[t]});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankCount& a, const RankCount& b) { return a.count > b.count; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

RepeatedErrors error_histogram_repeats(const Policy& policy, std::size_t n, std::size_t repeats,
                                       std::uint64_t seed, std::size_t max_len) {
  if (repeats < 2) throw ConfigError("confidence intervals need at least 2 repeats");
  const Vocab& vocab = policy.vocab();
  std::map<ErrorKind, std::vector<double>> per_kind;
  std::vector<double> totals;
  for (std::size_t r = 0; r < repeats; ++r) {
    SampleSet set = draw_samples(policy, n, splitmix64(seed + r), max_len);
    ErrorHistogram h = error_histogram(vocab, set.samples);
    double total = 0.0;
    for (const auto& [k, f] : h) {
      per_kind[k].push_back(f);
      total += f;
    }
    totals.push_back(total);
  }
  const double df = static_cast<double>(repeats - 1);
  const double t = boost::math::quantile(boost::math::students_t(df), 0.975);
  auto interval = [&](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= df;
    return HistogramInterval{mean, t * std::sqrt(var / static_cast<double>(xs.size()))};
  };
  RepeatedErrors out;
  for (const auto& [k, xs] : per_kind) out.categories[k] = interval(xs);
  out.total = interval(totals);
  return out;
}

std::vector<std::string> MetricsRecord::csv_header() {
  std::vector<std::string> h = {"compilability_rate", "forward_kl",       "reverse_kl",
                                "distinct1",          "self_bleu5",       "perplexity",
                                "mean_char_length",   "mean_ast_nodes",   "lint_rate",
                                "lint_rate_per_token"};
  for (ErrorKind k : kAllErrorKinds) h.push_back("err_" + std::string(to_string(k)));
  return h;
}

namespace {

std::string fmt(std::optional<double> v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

}  // namespace

std::vector<std::string> MetricsRecord::csv_row() const {
  std::vector<std::string> row = {fmt(compilability_rate), fmt(forward_kl),       fmt(reverse_kl),
                                  fmt(distinct1),          fmt(self_bleu5),       fmt(perplexity),
                                  fmt(mean_char_length),   fmt(mean_ast_nodes),   fmt(lint_rate),
                                  fmt(lint_rate_per_token)};
  for (ErrorKind k : kAllErrorKinds) {
    auto it = error_histogram.find(k);
    row.push_back(it == error_histogram.end() ? "" : fmt(it->second));
  }
  return row;
}

nlohmann::json MetricsRecord::to_json(const Vocab& vocab) const {
  nlohmann::json j;
  const auto header = csv_header();
  const std::vector<std::optional<double>> values = {
      compilability_rate, forward_kl,       reverse_kl,     distinct1, self_bleu5,
      perplexity,         mean_char_length, mean_ast_nodes, lint_rate, lint_rate_per_token};
  for (std::size_t i = 0; i < values.size(); ++i) {
    j[header[i]] = values[i] ? nlohmann::json(*values[i]) : nlohmann::json(nullptr);
  }
  for (const auto& [k, f] : error_histogram) j["error_histogram"][std::string(to_string(k))] = f;
  j["rank_frequency"] = nlohmann::json::array();
  for (const auto& rc : rank_frequency) {
    j["rank_frequency"].push_back({{"rank", rc.rank}, {"token", vocab.surface(rc.token)}, {"count", rc.count}});
  }
  j["failures"] = failures;
  return j;
}

MetricsRecord evaluate(const Policy& policy, const Ebm& ebm, const std::vector<TokenSeq>& test,
                       const EvalOptions& options, std::uint64_t seed) {
  if (options.n_samples < 2) throw ConfigError("evaluation needs at least 2 samples");
  const Vocab& vocab = policy.vocab();
  MetricsRecord rec;
  const SampleSet set = draw_samples(policy, options.n_samples, derive_seed(seed, 1),
                                     options.max_len, "policy");
  const auto& xs = set.samples;

  auto guarded = [&](const char* name, std::optional<double>& slot, auto&& compute) {
    try {
      slot = compute();
    } catch (const std::exception& e) {
      rec.failures[name] = e.what();
    }
  };

  guarded("compilability_rate", rec.compilability_rate,
          [&] { return compilability_rate(xs, [&](const TokenSeq& x) { return ebm.accepts(x); }); });
  guarded("forward_kl", rec.forward_kl, [&]() -> double {
    if (options.forward_kl) return *options.forward_kl;
    if (options.exact && enumeration_feasible(vocab.size(), options.max_len)) {
      return exact_forward_kl(exact_p(ebm, options.max_len), policy);
    }
    const Policy& proposal = options.proposal ? *options.proposal : ebm.base();
    const SampleSet qs = draw_samples(proposal, options.n_samples, derive_seed(seed, 2),
                                      options.max_len, "proposal");
    const PartitionEstimate z = options.z ? *options.z : estimate_z(ebm, proposal, qs.samples);
    return is_forward_kl(ebm, z, policy, proposal, qs.samples).value;
  });
  guarded("reverse_kl", rec.reverse_kl, [&] { return reverse_kl(policy, ebm.base(), xs).value; });
  guarded("distinct1", rec.distinct1, [&] { return distinct1(vocab, xs); });
  guarded("self_bleu5", rec.self_bleu5, [&] {
    const std::size_t m = std::min(xs.size(), options.self_bleu_samples);
    return self_bleu5(vocab, std::vector<TokenSeq>(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(m)));
  });
  guarded("perplexity", rec.perplexity, [&] { return perplexity(policy, test); });
  guarded("mean_char_length", rec.mean_char_length, [&] { return mean_char_length(vocab, xs); });
  guarded("mean_ast_nodes", rec.mean_ast_nodes, [&] { return mean_ast_nodes(vocab, xs); });
  try {
    const LintRate lr = lint_rate(vocab, xs);
    rec.lint_rate = lr.per_char;
    rec.lint_rate_per_token = lr.per_token;
  } catch (const std::exception& e) {
    rec.failures["lint_rate"] = e.what();
  }
  rec.error_histogram = error_histogram(vocab, xs);
  rec.rank_frequency = token_rank_frequency(vocab, xs);
  return rec;
}

std::string error_histogram_csv(const ErrorHistogram& h) {
  std::string out = "error_kind,frequency\n";
  for (const auto& [k, f] : h) out += std::string(to_string(k)) + "," + fmt(f) + "\n";
  return out;
}

std::string rank_frequency_csv(const Vocab& vocab, const std::vector<RankCount>& rf) {
  std::string out = "rank,token,count\n";
  for (const auto& rc : rf) {
    out += std::to_string(rc.rank) + "," + vocab.surface(rc.token) + "," + std::to_string(rc.count) + "\n";
  }
  return out;
}

}  // namespace kdpg
