#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "oracles.hpp"
#include "otdl/learning.hpp"
#include "otdl/network.hpp"

using namespace otdl;

namespace {

NTupleNetwork tiny_net() {
  return NTupleNetwork({TupleDef{{0, 1, 2, 3}}, TupleDef{{4, 5, 6, 7}}, TupleDef{{0, 1, 4, 5}}}, true);
}

// V(b) = raw board bits mod 97, easy to recompute by hand.
class HashValue final : public AfterstateEvaluator {
 public:
  double value(Board b) const override { return static_cast<double>(b.raw() % 97) - 40.0; }
};

std::vector<StepRecord> random_steps(Rng& rng, std::size_t n) {
  std::vector<StepRecord> s;
  for (std::size_t i = 0; i < n; ++i)
    s.push_back({oracle::random_board(rng, 5, 9), static_cast<std::uint32_t>(4 * rng.below(10))});
  return s;
}

// R^(k) from the definition: k rewards then V of the k-th afterstate, or the
// plain reward sum when the episode ends first.
double nstep_oracle(const std::vector<StepRecord>& suffix, int k, const AfterstateEvaluator& v) {
  double g = 0.0;
  for (int i = 0; i < k && i < static_cast<int>(suffix.size()); ++i) g += suffix[static_cast<std::size_t>(i)].reward;
  if (k <= static_cast<int>(suffix.size())) g += v.value(suffix[static_cast<std::size_t>(k - 1)].afterstate);
  return g;
}

LearnerConfig quick_config() {
  LearnerConfig c;
  c.total_episodes = 60;
  c.alpha = 0.1;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_SUITE("learning") {

TEST_CASE("n-step returns") {
  const HashValue v;
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto suffix = random_steps(rng, rng.below(7));
    for (int n = 1; n <= 8; ++n) REQUIRE(nstep_return(suffix, n, v) == doctest::Approx(nstep_oracle(suffix, n, v)));
  }
  // terminal next state: the target is zero
  CHECK(nstep_return({}, 1, v) == 0.0);
}

TEST_CASE("lambda returns match the truncated weighted sum") {
  const HashValue v;
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto suffix = random_steps(rng, rng.below(8));
    const int horizon = 1 + static_cast<int>(rng.below(6));
    const double lambda = rng.uniform();
    double expect = 0.0;
    for (int k = 1; k < horizon; ++k) expect += (1 - lambda) * std::pow(lambda, k - 1) * nstep_oracle(suffix, k, v);
    expect += std::pow(lambda, horizon - 1) * nstep_oracle(suffix, horizon, v);
    REQUIRE(lambda_return(suffix, lambda, horizon, v) == doctest::Approx(expect).epsilon(1e-12));
  }
  const auto suffix = random_steps(rng, 5);
  CHECK(lambda_return(suffix, 0.0, 4, v) == doctest::Approx(nstep_return(suffix, 1, v)));
  CHECK(lambda_return(suffix, 1.0, 4, v) == doctest::Approx(nstep_return(suffix, 4, v)));
  // past the end of the episode every R^(k) is the Monte Carlo return
  const auto two = random_steps(rng, 2);
  const double mc = two[0].reward + two[1].reward;
  CHECK(lambda_return(two, 0.3, 6, v) ==
        doctest::Approx(0.7 * nstep_oracle(two, 1, v) + 0.3 * 0.7 * nstep_oracle(two, 2, v) +
                        (0.3 * 0.3 * 0.7 + std::pow(0.3, 3) * 0.7 + std::pow(0.3, 4) * 0.7 + std::pow(0.3, 5)) * mc));
}

TEST_CASE("TD(0) update moves V(s') toward r + V(s'_next)") {
  NTupleNetwork net({TupleDef{{0, 1}}}, false);
  Transition step;
  step.afterstate = Board(0x21);
  const NextStep next{8, Board(0x3)};
  net.update(next.afterstate, 100.0);
  const double delta = td0_update(net, step, next, 0.5);
  CHECK(delta == doctest::Approx(108.0));
  CHECK(net.value(step.afterstate) == doctest::Approx(54.0));
  // terminal successor: target 0
  CHECK(td0_update(net, step, std::nullopt, 1.0) == doctest::Approx(-54.0));
  CHECK(net.value(step.afterstate) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("rectified and ReLU TD") {
  NTupleNetwork net({TupleDef{{0, 1}}}, false);
  Transition step;
  step.afterstate = Board(0x21);
  const NextStep next{4, Board(0x3)};
  net.update(next.afterstate, -50.0);
  // negative successor values are clipped to zero
  CHECK(rectified_td_update(net, step, next, 1.0) == doctest::Approx(4.0));
  CHECK(rectified_value(net, next.afterstate) == 0.0);

  net.update(step.afterstate, -10.0);  // V(s') = -6 now
  CHECK(net.value(step.afterstate) == doctest::Approx(-6.0));
  CHECK_FALSE(relu_td_update(net, step, next, 1.0).has_value());
  CHECK(net.value(step.afterstate) == doctest::Approx(-6.0));
}

TEST_CASE("learner skips ReLU updates on negative values and honours the owner") {
  LearnerConfig cfg;
  cfg.algorithm = Algorithm::ReLUTD;
  NTupleNetwork net({TupleDef{{0, 1}}}, false);
  Learner learner(net, cfg);
  std::vector<StepRecord> steps{{Board(0x1), 4}, {Board(0x12), 8}};
  net.update(steps[0].afterstate, -5.0);
  net.update(steps[1].afterstate, 50.0);
  REQUIRE(net.value(steps[0].afterstate) < 0.0);
  REQUIRE(net.value(steps[1].afterstate) >= 0.0);
  CHECK_FALSE(learner.learn(steps, 0).has_value());
  CHECK(learner.learn(steps, 1).has_value());

  LearnerConfig td;
  NTupleNetwork other = tiny_net();
  Learner owned(other, td);
  owned.set_owner([](Board b) { return b.raw() != 0x1; });
  CHECK_FALSE(owned.learn(steps, 0).has_value());
  CHECK(other.value(Board(0x1)) == 0.0);
}

TEST_CASE("forward and backward order agree only on one-step trajectories") {
  LearnerConfig cfg;
  cfg.alpha = 0.5;
  Rng rng(3);
  const auto steps = random_steps(rng, 12);
  auto run = [&](std::size_t len, bool forward) {
    NTupleNetwork net = tiny_net();
    net.init_optimistic(100.0);
    Learner l(net, cfg);
    const std::span<const StepRecord> traj(steps.data(), len);
    if (forward) {
      for (std::size_t t = 0; t < len; ++t) l.learn(traj, t);
    } else {
      for (std::size_t t = len; t-- > 0;) l.learn(traj, t);
    }
    return std::vector<float>(net.weights().begin(), net.weights().end());
  };
  CHECK(run(1, true) == run(1, false));
  CHECK(run(12, true) != run(12, false));
}

TEST_CASE("episodes learn in the requested order") {
  // a scripted sequence of moves makes both orders see the same trajectory
  for (auto order : {UpdateOrder::Forward, UpdateOrder::Backward}) {
    LearnerConfig cfg;
    cfg.algorithm = Algorithm::NStepTD;
    cfg.nstep = 3;
    cfg.order = order;
    NTupleNetwork net = tiny_net();
    Learner learner(net, cfg);
    Rng rng(17);
    EpisodeOptions opt;
    opt.record = true;
    opt.order = order;
    const EpisodeResult r = run_episode(greedy_policy(ConstantEvaluator(0.0)), &learner, rng, opt);
    CHECK(r.moves == r.trajectory.size());
    CHECK(r.trajectory.back().next_terminal);
    std::uint64_t score = 0;
    for (const auto& t : r.trajectory) score += t.reward;
    CHECK(score == r.score);
    // the network learned something on the way
    double mag = 0.0;
    for (float w : net.weights()) mag += std::abs(w);
    CHECK(mag > 0.0);
  }
}

TEST_CASE("configuration validation rejects contradictions") {
  auto bad = [](auto edit) {
    LearnerConfig c;
    edit(c);
    return [c] { c.validate(); };
  };
  CHECK_NOTHROW(LearnerConfig{}.validate());
  CHECK_THROWS_AS(bad([](LearnerConfig& c) { c.p_tc = 1.5; })(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) { c.total_episodes = 0; })(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) {
                    c.algorithm = Algorithm::TC;
                    c.p_tc = 0.5;
                  })(),
                  std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) {
                    c.algorithm = Algorithm::ReLUTD;
                    c.p_tc = 0.1;
                  })(),
                  std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) { c.coherence_reset_every = 10; })(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) { c.eval_every = 10; })(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) { c.workers = 0; })(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) { c.lr_schedule = {{0.5, 0.01}, {0.4, 0.001}}; })(),
                  std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) { c.lr_schedule = {{0.5, 0.5}}; })(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](LearnerConfig& c) {
                    c.exploration = {Exploration::Kind::EpsilonGreedy, 1.5};
                  })(),
                  std::invalid_argument);
}

TEST_CASE("phase switch point and learning-rate schedule") {
  LearnerConfig c = method_preset("otd+tc");
  c.total_episodes = 1001;
  CHECK(c.v_init == 320000.0);
  CHECK(c.tc_start() == 900);  // floor(0.9 * 1001)
  c = method_preset("otd");
  c.total_episodes = 1000;
  CHECK(c.alpha_at(0) == 0.1);
  CHECK(c.alpha_at(499) == 0.1);
  CHECK(c.alpha_at(500) == 0.01);
  CHECK(c.alpha_at(750) == 0.001);
  CHECK(method_preset("otc").algorithm == Algorithm::TC);
  CHECK(method_preset("otc").tc_start() == 0);
  CHECK(method_preset("td").tc_start() == method_preset("td").total_episodes);
  CHECK_THROWS_AS(method_preset("xyz"), std::invalid_argument);
  for (auto a : {Algorithm::TD0, Algorithm::NStepTD, Algorithm::TDLambda, Algorithm::TC, Algorithm::RectifiedTD,
                 Algorithm::ReLUTD})
    CHECK(parse_algorithm(to_string(a)) == a);
}

TEST_CASE("training is reproducible from the seed") {
  LearnerConfig c = quick_config();
  c.eval_every = 30;
  c.eval_episodes = 5;
  NTupleNetwork a = tiny_net(), b = tiny_net();
  const LearningCurve ca = train(c, a);
  const LearningCurve cb = train(c, b);
  CHECK(ca == cb);
  CHECK(ca.points.size() == 2);
  CHECK(ca.points[1].episodes == 60);
  CHECK(std::equal(a.weights().begin(), a.weights().end(), b.weights().begin()));
  for (const auto& p : ca.points) {
    CHECK(p.rates[0] >= p.rates[1]);
    CHECK(p.rates[1] >= p.rates[2]);
  }
  std::ostringstream csv;
  ca.write_csv(csv);
  CHECK(csv.str().rfind("episodes,avg_score,max_score,rate_2048,rate_8192,rate_16384,rate_32768\n", 0) == 0);
}

TEST_CASE("otd+tc switches phase and snapshots before each reset") {
  LearnerConfig c = method_preset("otd+tc");
  c.total_episodes = 40;
  c.p_tc = 0.5;
  c.v_init = 1000;
  c.coherence_reset_every = 10;
  NTupleNetwork net = tiny_net();
  std::vector<std::uint64_t> snaps;
  TrainHooks hooks;
  hooks.on_snapshot = [&](std::uint64_t e, const NTupleNetwork& n) {
    CHECK(n.has_coherence());
    snaps.push_back(e);
  };
  const LearningCurve curve = train(c, net, hooks);
  CHECK(net.has_coherence());
  // resets happen inside the TC phase only (from episode 20)
  CHECK(snaps == std::vector<std::uint64_t>{30, 40});
  CHECK(curve.snapshots == 2);
}

TEST_CASE("exploration decays to greedy") {
  const HashValue v;
  Rng rng(4);
  const Board s = oracle::random_board(rng, 6, 5);
  const auto greedy = greedy_action(v, s);
  REQUIRE(greedy);
  for (auto kind : {Exploration::Kind::EpsilonGreedy, Exploration::Kind::Softmax}) {
    for (int i = 0; i < 50; ++i) {
      const auto d = select_action(v, s, {kind, 1.0}, 1.0, rng);
      REQUIRE(d->action == greedy->action);
    }
  }
  // full epsilon picks every legal move eventually
  std::set<int> seen;
  for (int i = 0; i < 400; ++i) seen.insert(static_cast<int>(select_action(v, s, {Exploration::Kind::EpsilonGreedy, 1.0}, 0.0, rng)->action));
  CHECK(static_cast<int>(seen.size()) == legal_actions(s).size());
}

TEST_CASE("parallel training runs every episode") {
  LearnerConfig c = quick_config();
  c.workers = 2;
  NTupleNetwork net = tiny_net();
  std::uint64_t evaluations = 0;
  c.eval_every = 60;
  c.eval_episodes = 4;
  TrainHooks hooks;
  hooks.on_eval = [&](const EvalPoint& p) {
    ++evaluations;
    CHECK(p.episodes == 60);
  };
  train(c, net, hooks);
  CHECK(evaluations == 1);
}

TEST_CASE("multistage training only touches its own stage") {
  std::vector<NTupleNetwork> stages{tiny_net(), tiny_net()};
  MultistageNetwork msn(std::move(stages), {TileMultiset{}, TileMultiset::parse("64")});
  Rng rng(8);
  const auto pool = harvest_stage_starts(msn, TileMultiset::parse("64"), 30, rng);
  REQUIRE_FALSE(pool.empty());
  for (Board b : pool) CHECK(TileMultiset::parse("64").contained_in(TileMultiset::of_board(b)));

  LearnerConfig c = quick_config();
  c.total_episodes = 20;
  multistage_train(c, msn, 1, pool);
  double stage0 = 0.0, stage1 = 0.0;
  for (float w : msn.stage(0).weights()) stage0 += std::abs(w);
  for (float w : msn.stage(1).weights()) stage1 += std::abs(w);
  CHECK(stage0 == 0.0);
  CHECK(stage1 > 0.0);
  CHECK_THROWS_AS(multistage_train(c, msn, 1, {}), std::invalid_argument);
  CHECK_THROWS_AS(multistage_train(c, msn, 2, pool), std::invalid_argument);
}

}  // TEST_SUITE
