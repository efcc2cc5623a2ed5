#include <benchmark/benchmark.h>

#include <vector>

#include "otdl/mcts.hpp"
#include "otdl/presets.hpp"
#include "otdl/search.hpp"

using namespace otdl;

namespace {

// Mid-game positions from random play, with a weakly shaped value function.
struct Fixture {
  NTupleNetwork net = make_preset_network("4x6");
  std::vector<Board> positions;

  Fixture() {
    Rng rng(3);
    for (float& w : net.weights()) w = static_cast<float>(rng.uniform() * 10.0);
    while (positions.size() < 64) {
      Board s = initial_state(rng);
      for (int k = 0; k < 60; ++k) {
        const auto legal = legal_actions(s).to_vector();
        if (legal.empty()) break;
        s = spawn_random(slide(s, legal[rng.below(legal.size())]).afterstate, rng);
      }
      if (!is_terminal(s)) positions.push_back(s);
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Expectimax(benchmark::State& state) {
  const Fixture& f = fixture();
  SearchConfig cfg;
  cfg.depth = static_cast<int>(state.range(0));
  cfg.use_tt = state.range(1) != 0;
  Expectimax search(f.net, cfg);
  std::size_t i = 0;
  std::uint64_t nodes = 0;
  for (auto _ : state) {
    // a warm cache from the previous lap would make later laps free
    if (search.table() && (i & 63) == 0) {
      state.PauseTiming();
      search.table()->clear();
      state.ResumeTiming();
    }
    nodes += search.search(f.positions[i++ & 63]).nodes;
  }
  state.counters["nodes/s"] = benchmark::Counter(static_cast<double>(nodes), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Expectimax)->Args({1, 0})->Args({2, 0})->Args({2, 1})->Args({3, 1})->Unit(benchmark::kMicrosecond);

void BM_Mcts(benchmark::State& state) {
  const Fixture& f = fixture();
  MctsConfig cfg;
  cfg.simulations = static_cast<int>(state.range(0));
  Mcts mcts(f.net, cfg);
  Rng rng(5);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mcts.search(f.positions[i++ & 63], rng));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Mcts)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

}  // namespace
