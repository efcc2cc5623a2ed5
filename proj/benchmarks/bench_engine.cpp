#include <benchmark/benchmark.h>

#include <vector>

#include "otdl/board.hpp"
#include "otdl/network.hpp"
#include "otdl/presets.hpp"

using namespace otdl;

namespace {

std::vector<Board> sample_boards(std::size_t n) {
  Rng rng(1);
  std::vector<Board> out;
  Board s = initial_state(rng);
  while (out.size() < n) {
    out.push_back(s);
    const auto legal = legal_actions(s).to_vector();
    if (legal.empty()) {
      s = initial_state(rng);
      continue;
    }
    s = spawn_random(slide(s, legal[rng.below(legal.size())]).afterstate, rng);
  }
  return out;
}

void BM_Slide(benchmark::State& state) {
  const auto boards = sample_boards(4096);
  std::size_t i = 0;
  for (auto _ : state) {
    const Board b = boards[i++ & 4095];
    for (Action a : kActions) benchmark::DoNotOptimize(slide(b, a));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 4);
}
BENCHMARK(BM_Slide);

void BM_Isomorphisms(benchmark::State& state) {
  const auto boards = sample_boards(4096);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(isomorphisms(boards[i++ & 4095]));
}
BENCHMARK(BM_Isomorphisms);

void BM_Value(benchmark::State& state) {
  const NTupleNetwork net = make_preset_network(state.range(0) == 4 ? "4x6" : "8x6");
  const auto boards = sample_boards(4096);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(net.value(boards[i++ & 4095]));
}
BENCHMARK(BM_Value)->Arg(4)->Arg(8);

void BM_Update(benchmark::State& state) {
  NTupleNetwork net = make_preset_network("4x6");
  const auto boards = sample_boards(4096);
  std::size_t i = 0;
  for (auto _ : state) net.update(boards[i++ & 4095], 1.0);
}
BENCHMARK(BM_Update);

void BM_TcUpdate(benchmark::State& state) {
  NTupleNetwork net = make_preset_network("4x6");
  net.enable_coherence();
  const auto boards = sample_boards(4096);
  std::size_t i = 0;
  for (auto _ : state) net.tc_update(boards[i++ & 4095], (i & 1) ? 1.0 : -1.0, 1.0);
}
BENCHMARK(BM_TcUpdate);

}  // namespace

BENCHMARK_MAIN();
