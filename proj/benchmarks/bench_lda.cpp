#include <benchmark/benchmark.h>

#include "drl/corpus.hpp"
#include "drl/lda.hpp"
#include "drl/synthetic.hpp"

namespace {

struct Corpus {
  drl::PreprocessResult prep;

  Corpus() {
    drl::synthetic::DrlFixtureSpec spec;
    const auto fixture = drl::synthetic::make_drl_fixture(spec);
    prep = drl::preprocess(fixture.docs, drl::default_preprocess_config());
  }
};

const Corpus& corpus() {
  static const Corpus c;
  return c;
}

drl::LdaConfig config(int topics) {
  drl::LdaConfig lda;
  lda.num_topics = topics;
  lda.alpha = 0.3;
  lda.train_iterations = 2;
  lda.seed = 1;
  return lda;
}

void BM_GibbsSweep(benchmark::State& state) {
  const auto& c = corpus();
  drl::GibbsSampler sampler(c.prep.docs, c.prep.vocab.size(), config(static_cast<int>(state.range(0))));
  for (auto _ : state) sampler.sweep();
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sampler.num_tokens()));
}
BENCHMARK(BM_GibbsSweep)->Arg(5)->Arg(20)->Arg(50);

void BM_Project(benchmark::State& state) {
  const auto& c = corpus();
  auto lda = config(static_cast<int>(state.range(0)));
  lda.train_iterations = 50;
  lda.infer_iterations = 100;
  const auto model = drl::train(c.prep.docs, c.prep.vocab, lda);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(drl::project(model, c.prep.docs[seed % c.prep.docs.size()], seed));
    ++seed;
  }
}
BENCHMARK(BM_Project)->Arg(5)->Arg(50);

}  // namespace
