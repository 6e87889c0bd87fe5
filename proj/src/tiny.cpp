#include "kdpg/tiny.hpp"

#include "kdpg/train.hpp"

namespace kdpg {

TinySetup tiny_setup(std::uint64_t seed) {
  Vocab vocab({"x", "1", "=", ";"});
  const std::vector<TokenSeq> corpus = {tokenize(vocab, "x = x ;"), tokenize(vocab, "x = 1 ;")};
  MleConfig mle;
  mle.learning_rate = 0.1;
  mle.batch_size = 2;
  mle.epochs = 15;
  mle.seed = seed;
  Policy init = Policy::tabular(vocab, 2, seed);
  return {vocab, train_base(corpus, std::move(init), mle).policy, 6};
}

}  // namespace kdpg
