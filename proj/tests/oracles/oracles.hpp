#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond plain data (token surfaces, raw parameter arrays).

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace oracle {

/// Grammar membership by CYK over a binarized form of the MiniLang grammar.
/// `body` holds surface tokens without BOS/EOS.
bool cyk_member(const std::vector<std::string>& body);

/// A bigram model given by its raw logits table (rows = previous token,
/// columns = next token), with the BOS column masked out.
struct Bigram {
  std::vector<std::string> surfaces;  // index = token id
  std::size_t bos = 0;
  std::size_t eos = 0;
  std::vector<double> logits;  // surfaces.size()^2, row-major

  double next_prob(std::size_t prev, std::size_t next) const;
};

struct Outcome {
  std::vector<std::size_t> ids;  // starts with BOS
  double prob = 0.0;
  bool terminated = false;
};

/// Every outcome of ancestral sampling with length cap `max_len` (BOS and
/// EOS included), generated by counting through all token strings.
std::vector<Outcome> enumerate(const Bigram& model, std::size_t max_len);

/// Body surfaces of an outcome (no BOS/EOS).
std::vector<std::string> body_of(const Bigram& model, const Outcome& o);

/// Z = sum of a(x) over terminated x whose body the CYK oracle accepts.
double partition(const Bigram& model, std::size_t max_len);

/// Central finite differences of f at x with step h.
std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, double h);

/// Sentence BLEU of `hyp` against `refs`: clipped n-gram precisions for
/// n = 1..min(max_n, |hyp|), geometric mean, brevity penalty with the closest
/// reference length (ties to the shorter). Straightforward counting.
double bleu(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs,
            std::size_t max_n);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace oracle
