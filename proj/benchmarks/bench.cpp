#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "driftscope/embed.hpp"
#include "driftscope/freq.hpp"
#include "driftscope/text.hpp"

using namespace driftscope;

namespace {

std::string word(std::size_t i) { return "w" + std::to_string(i % 500); }

std::vector<text::TokenStream> synthetic_corpus(std::size_t docs, std::size_t len) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> pick(0, 4999);
  std::vector<text::TokenStream> out(docs);
  for (auto& doc : out) {
    doc.reserve(len);
    for (std::size_t i = 0; i < len; ++i) doc.push_back(word(pick(rng) % 500));
  }
  return out;
}

void BM_Tokenize(benchmark::State& state) {
  const std::string line =
      "Hydroxychloroquine and azithromycin as a treatment of COVID-19: results of "
      "an open-label non-randomized clinical trial (SARS-CoV-2, 2020).";
  std::size_t bytes = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(text::tokenize(line));
    bytes += line.size();
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_Tokenize);

void BM_ApplyPhrases(benchmark::State& state) {
  text::PhraseDictionary dict;
  dict.add_seed("folic_acid");
  dict.add_seed("vitamin_d");
  dict.add_learned("spike_protein", 13.6);
  const auto corpus = synthetic_corpus(64, 120);
  for (auto _ : state) {
    for (const auto& doc : corpus) benchmark::DoNotOptimize(text::apply_phrases(doc, dict));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ApplyPhrases);

void BM_BuildTfidfTable(benchmark::State& state) {
  const auto corpus = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 80);
  const auto vocab = text::Vocabulary::build(corpus, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(freq::build_table("s", corpus, vocab));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildTfidfTable)->Arg(100)->Arg(1000);

void BM_CbowStep(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  embed::Matrix<float> target(2000, dim);
  embed::Matrix<float> context(2000, dim);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<float> init(-0.5f, 0.5f);
  for (std::size_t r = 0; r < 2000; ++r) {
    for (auto& v : target.row(r)) v = init(rng);
    for (auto& v : context.row(r)) v = init(rng);
  }
  const std::vector<std::uint32_t> ctx = {3, 94, 250, 777, 1204, 1961, 42, 98, 511, 1700};
  const std::vector<std::uint32_t> negs = {11, 222, 333, 444, 555};
  embed::CbowWorkspace<float> ws;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        embed::cbow_step_loss_and_gradients<float>(target, context, 17, ctx, negs, ws));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CbowStep)->Arg(100)->Arg(300);

void BM_NegativeSampler(benchmark::State& state) {
  std::vector<std::uint64_t> counts(50000);
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = 1 + 1000000 / (i + 1);
  const embed::NegativeSampler sampler(counts);
  std::mt19937_64 rng(31);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampler.sample(rng));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NegativeSampler);

}  // namespace

BENCHMARK_MAIN();
