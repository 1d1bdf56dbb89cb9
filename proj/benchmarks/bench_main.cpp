#include <benchmark/benchmark.h>

#include "tep/graph.hpp"
#include "tep/metrics.hpp"
#include "tep/mock_world.hpp"
#include "tep/rubric.hpp"
#include "tep/tasks.hpp"
#include "tep/text.hpp"
#include "tep/textgrad.hpp"
#include "tep/validation.hpp"

namespace {

void BM_QIndepExhaustive(benchmark::State& state) {
  for (auto _ : state) {
    double total = 0.0;
    std::array<int, 6> r{1, 1, 1, 1, 1, 1};
    for (int code = 0; code < 15625; ++code) {
      int c = code;
      for (auto& x : r) {
        x = 1 + c % 5;
        c /= 5;
      }
      total += tep::q_indep(r);
    }
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * 15625);
}
BENCHMARK(BM_QIndepExhaustive);

void BM_TokenCount(benchmark::State& state) {
  const std::string text = tep::text::pad_words(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tep::token_count(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_TokenCount)->Arg(100)->Arg(10000);

void BM_ExecuteCodePipeline(benchmark::State& state) {
  const auto graph = tep::build_code_pipeline(static_cast<int>(state.range(0)));
  auto world = tep::make_pipeline_world({});
  const auto task = tep::gen_code_tasks(1, 7).front();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tep::execute(graph, task, *world, ++seed));
}
BENCHMARK(BM_ExecuteCodePipeline)->DenseRange(1, 5);

void BM_BackpropCodePipeline(benchmark::State& state) {
  const auto graph = tep::build_code_pipeline(static_cast<int>(state.range(0)));
  auto world = tep::make_pipeline_world({});
  const auto task = tep::gen_code_tasks(1, 7).front();
  const auto params = graph.params();
  const auto trace = tep::execute(graph, params, task, *world, 1);
  const auto sink = *graph.index_of(graph.sinks().front());
  const auto loss = tep::final_loss_text(task, trace.outputs[sink].text);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        tep::backprop_update(graph, params, trace, loss, *world, tep::BackpropOptions{}));
  }
}
BENCHMARK(BM_BackpropCodePipeline)->DenseRange(1, 5);

void BM_GenCounting(benchmark::State& state) {
  tep::Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(tep::gen_counting(static_cast<int>(state.range(0)), rng));
}
BENCHMARK(BM_GenCounting)->DenseRange(1, 5);

}  // namespace

BENCHMARK_MAIN();
