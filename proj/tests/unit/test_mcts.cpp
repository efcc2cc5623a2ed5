#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "oracles.hpp"
#include "otdl/mcts.hpp"
#include "otdl/policy.hpp"

using namespace otdl;

namespace {

NTupleNetwork random_net(std::uint64_t seed) {
  NTupleNetwork net({TupleDef{{0, 1, 2, 3}}, TupleDef{{4, 5, 6, 7}}, TupleDef{{0, 1, 4, 5}}}, true);
  Rng rng(seed);
  for (float& w : net.weights()) w = static_cast<float>(rng.uniform() * 400.0);
  return net;
}

Board playable(Rng& rng) {
  while (true) {
    const Board b = oracle::random_board(rng, 8, 6);
    if (!legal_actions(b).empty()) return b;
  }
}

}  // namespace

TEST_SUITE("mcts") {

TEST_CASE("one simulation plays the greedy move") {
  const NTupleNetwork net = random_net(3);
  MctsConfig cfg;
  cfg.simulations = 1;
  Mcts mcts(net, cfg);
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Board b = playable(rng);
    const MctsResult r = mcts.search(b, rng);
    const auto g = greedy_action(net, b);
    REQUIRE(r.action);
    REQUIRE(g);
    CHECK(*r.action == g->action);
    CHECK(r.root_visits == 1);
    CHECK(r.tree_nodes == 1 + legal_actions(b).to_vector().size());
  }
}

TEST_CASE("visit counts add up") {
  const NTupleNetwork net = random_net(4);
  Rng rng(5);
  for (int sims : {2, 7, 50, 300}) {
    MctsConfig cfg;
    cfg.simulations = sims;
    cfg.c = 0.5;
    Mcts mcts(net, cfg);
    const Board b = playable(rng);
    const MctsResult r = mcts.search(b, rng);
    CHECK(r.root_visits == static_cast<std::uint32_t>(sims));
    CHECK(std::accumulate(r.counts.begin(), r.counts.end(), 0u) == r.root_visits - 1);
    // every node's visits equal the sum over its children, plus its own first visit
    for (const MctsNode& n : mcts.nodes()) {
      if (n.kind != MctsNode::Kind::Max || n.first_child < 0 || n.visits == 0) continue;
      std::uint32_t sum = 0;
      for (int k = 0; k < n.child_count; ++k) sum += mcts.nodes()[static_cast<std::size_t>(n.first_child + k)].visits;
      CHECK(sum + 1 == n.visits);
    }
  }
}

TEST_CASE("unvisited children are tried before any repeat") {
  const NTupleNetwork net = random_net(6);
  Rng rng(8);
  const Board b = playable(rng);
  const auto legal = legal_actions(b).to_vector();
  MctsConfig cfg;
  cfg.simulations = static_cast<int>(legal.size()) + 1;
  cfg.c = 100.0;
  Mcts mcts(net, cfg);
  const MctsResult r = mcts.search(b, rng);
  for (Action a : legal) CHECK(r.counts[static_cast<std::size_t>(a)] == 1);
}

TEST_CASE("single legal move collects every visit") {
  // Only Left moves: tiles packed on the right of each row with distinct values.
  Board b;
  const int rows[4][4] = {{0, 1, 2, 3}, {0, 4, 5, 6}, {0, 7, 8, 9}, {0, 1, 2, 3}};
  for (int r = 0; r < 4; ++r)
    for (int c = 1; c < 4; ++c) b.set(r * 4 + c, rows[r][c]);
  REQUIRE(legal_actions(b).to_vector().size() == 1);
  const NTupleNetwork net = random_net(9);
  MctsConfig cfg;
  cfg.simulations = 40;
  Mcts mcts(net, cfg);
  Rng rng(1);
  const MctsResult r = mcts.search(b, rng);
  REQUIRE(r.action);
  CHECK(*r.action == Action::Left);
  CHECK(r.counts[static_cast<std::size_t>(Action::Left)] == 39);
}

TEST_CASE("terminal root has no action") {
  Board b;
  for (int i = 0; i < 16; ++i) b.set(i, 1 + ((i / 4 + i % 4) % 2));
  const NTupleNetwork net = random_net(1);
  Mcts mcts(net, MctsConfig{});
  Rng rng(1);
  const MctsResult r = mcts.search(b, rng);
  CHECK_FALSE(r.action);
  CHECK(r.root_visits == 0);
  CHECK_THROWS_AS(strength_policy(r, 1.0, 0.0, rng), std::invalid_argument);
}

TEST_CASE("search is reproducible for a seed") {
  const NTupleNetwork net = random_net(12);
  MctsConfig cfg;
  cfg.simulations = 200;
  cfg.c = 0.1;
  Rng pick(3);
  const Board b = playable(pick);
  Mcts one(net, cfg), two(net, cfg);
  Rng r1(77), r2(77);
  const MctsResult a = one.search(b, r1);
  const MctsResult c = two.search(b, r2);
  CHECK(a.counts == c.counts);
  CHECK(a.q == c.q);
  CHECK(a.action == c.action);
}

TEST_CASE("ucb score") {
  CHECK(std::isinf(ucb_score(0.3, 10, 0, 1.0)));
  CHECK(ucb_score(0.3, 10, 4, 0.0) == 0.3);
  CHECK(ucb_score(0.3, 10, 4, 2.0) == doctest::Approx(0.3 + 2.0 * std::sqrt(std::log(10.0) / 4.0)));
}

TEST_CASE("dynamic normalization uses the best one-step value") {
  const NTupleNetwork net = random_net(13);
  Rng rng(2);
  const Board b = playable(rng);
  MctsConfig cfg;
  cfg.simulations = 10;
  cfg.dynamic_vnorm = true;
  Mcts mcts(net, cfg);
  const MctsResult r = mcts.search(b, rng);
  CHECK(r.v_norm == doctest::Approx(std::max(greedy_action(net, b)->value, 1.0)));

  const ConstantEvaluator negative(-50.0);
  Mcts low(negative, cfg);
  Board lone;
  lone.set(0, 1);
  lone.set(15, 2);
  CHECK(low.search(lone, rng).v_norm == 1.0);
}

TEST_CASE("training target") {
  MctsResult r;
  CHECK(mcts_training_target(r, 7.5) == -7.5);
  r.action = Action::Right;
  r.v_norm = 1000.0;
  r.counts[1] = 4;
  r.q[1] = 0.25;
  r.one_step[1] = 999.0;
  CHECK(mcts_training_target(r, 100.0) == doctest::Approx(150.0));
  r.counts[1] = 0;
  CHECK(mcts_training_target(r, 100.0) == doctest::Approx(899.0));
}

TEST_CASE("strength probabilities") {
  const std::vector<std::uint32_t> counts{30, 10, 0, 5};
  SUBCASE("z = 0 is uniform over survivors") {
    const auto p = strength_probabilities(counts, 0.0, 0.0);
    for (double x : p) CHECK(x == doctest::Approx(0.25));
    const auto q = strength_probabilities(counts, 0.0, 0.2);
    CHECK(q[0] == doctest::Approx(0.5));
    CHECK(q[1] == doctest::Approx(0.5));
    CHECK(q[2] == 0.0);
    CHECK(q[3] == 0.0);
  }
  SUBCASE("z = 1 is proportional to visits") {
    const auto p = strength_probabilities(counts, 1.0, 0.0);
    CHECK(p[0] == doctest::Approx(30.0 / 45));
    CHECK(p[1] == doctest::Approx(10.0 / 45));
    CHECK(p[3] == doctest::Approx(5.0 / 45));
  }
  SUBCASE("large z is the argmax") {
    const auto p = strength_probabilities(counts, 50.0, 0.0);
    CHECK(p[0] == 1.0);
    CHECK(p[1] + p[2] + p[3] < 1e-20);
  }
  SUBCASE("negative z favors the least visited survivor") {
    const auto p = strength_probabilities(counts, -2.0, 0.0);
    CHECK(p[2] == 1.0);
    const auto q = strength_probabilities(counts, -1.0, 0.2);
    CHECK(q[1] == doctest::Approx(0.75));
  }
  SUBCASE("empty and all-zero counts") {
    CHECK(strength_probabilities({}, 1.0, 0.0).empty());
    const std::vector<std::uint32_t> zeros{0, 0};
    const auto p = strength_probabilities(zeros, 3.0, 0.5);
    CHECK(p[0] == 0.5);
  }
  SUBCASE("sampling matches the probabilities") {
    Rng rng(4);
    std::array<int, 4> hits{};
    const int n = 200000;
    for (int i = 0; i < n; ++i) ++hits[strength_sample(counts, 1.0, 0.0, rng)];
    const auto p = strength_probabilities(counts, 1.0, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      const double sd = std::sqrt(p[i] * (1 - p[i]) / n);
      CHECK(std::abs(hits[i] / double(n) - p[i]) <= 5 * sd + 1e-12);
    }
  }
}

TEST_CASE("root statistics csv") {
  MctsResult r;
  r.action = Action::Up;
  r.legal.insert(Action::Up);
  r.legal.insert(Action::Left);
  r.counts = {8, 0, 0, 2};
  r.q = {0.5, 0, 0, 0.25};
  std::ostringstream out;
  r.write_csv(out, 0.5);
  CHECK(out.str() == "action,N,Q,filtered\nU,8,0.5,0\nL,2,0.25,1\n");
}

TEST_CASE("config validation") {
  MctsConfig cfg;
  cfg.simulations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = MctsConfig{};
  cfg.c = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = MctsConfig{};
  cfg.v_norm = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.dynamic_vnorm = true;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("training episode moves weights") {
  NTupleNetwork net({TupleDef{{0, 1, 2, 3}}, TupleDef{{0, 4, 8, 12}}}, true);
  MctsConfig cfg;
  cfg.simulations = 8;
  cfg.dynamic_vnorm = true;
  Rng rng(21);
  const EpisodeResult ep = mcts_training_episode(net, cfg, 0.1, false, rng);
  CHECK(ep.moves > 0);
  CHECK(ep.score > 0);
  bool changed = false;
  for (float w : net.weights()) changed |= w != 0.0f;
  CHECK(changed);
}

}  // TEST_SUITE
