#include "otdl/learning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "otdl/evaluation.hpp"

namespace otdl {

// ---------------------------------------------------------------------------
// Returns

double nstep_return(std::span<const StepRecord> suffix, int n, const AfterstateEvaluator& v) {
  const std::size_t steps = std::min(suffix.size(), static_cast<std::size_t>(n));
  double g = 0.0;
  for (std::size_t k = 0; k < steps; ++k) g += suffix[k].reward;
  if (suffix.size() >= static_cast<std::size_t>(n)) g += v.value(suffix[static_cast<std::size_t>(n) - 1].afterstate);
  return g;
}

double lambda_return(std::span<const StepRecord> suffix, double lambda, int horizon,
                     const AfterstateEvaluator& v) {
  double result = 0.0;
  double rewards = 0.0;
  double weight = 1.0;  // lambda^{k-1}
  for (int k = 1; k <= horizon; ++k) {
    const auto idx = static_cast<std::size_t>(k - 1);
    double rk;
    if (idx < suffix.size()) {
      rewards += suffix[idx].reward;
      rk = rewards + v.value(suffix[idx].afterstate);
    } else {
      rk = rewards;  // episode over: R^(k) is the Monte Carlo return
    }
    result += (k < horizon ? (1.0 - lambda) * weight : weight) * rk;
    weight *= lambda;
  }
  return result;
}

double rectified_value(const AfterstateEvaluator& v, Board afterstate) {
  return std::max(v.value(afterstate), 0.0);
}

// ---------------------------------------------------------------------------
// Update rules

double td0_update(NTupleNetwork& net, const Transition& step, const std::optional<NextStep>& next,
                  double alpha) {
  const double target = next ? next->reward + net.value(next->afterstate) : 0.0;
  const double delta = target - net.value(step.afterstate);
  net.update(step.afterstate, alpha * delta);
  return delta;
}

void tc_update(NTupleNetwork& net, Board afterstate, double delta, double alpha) {
  net.tc_update(afterstate, delta, alpha);
}

double rectified_td_update(NTupleNetwork& net, const Transition& step,
                           const std::optional<NextStep>& next, double alpha) {
  const double target = next ? next->reward + rectified_value(net, next->afterstate) : 0.0;
  const double delta = target - net.value(step.afterstate);
  net.update(step.afterstate, alpha * delta);
  return delta;
}

std::optional<double> relu_td_update(NTupleNetwork& net, const Transition& step,
                                     const std::optional<NextStep>& next, double alpha) {
  const double current = net.value(step.afterstate);
  if (current < 0.0) return std::nullopt;
  const double target = next ? next->reward + rectified_value(net, next->afterstate) : 0.0;
  const double delta = target - current;
  net.update(step.afterstate, alpha * delta);
  return delta;
}

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::TD0: return "td0";
    case Algorithm::NStepTD: return "nstep";
    case Algorithm::TDLambda: return "lambda";
    case Algorithm::TC: return "tc";
    case Algorithm::RectifiedTD: return "rectified";
    case Algorithm::ReLUTD: return "relu";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  for (Algorithm a : {Algorithm::TD0, Algorithm::NStepTD, Algorithm::TDLambda, Algorithm::TC,
                      Algorithm::RectifiedTD, Algorithm::ReLUTD})
    if (to_string(a) == text) return a;
  throw std::invalid_argument("unknown algorithm '" + std::string(text) + "'");
}

void LearnerConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (total_episodes == 0) fail("total_episodes must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha must be a finite nonnegative number");
  if (!(tc_alpha >= 0.0) || !std::isfinite(tc_alpha)) fail("tc_alpha must be a finite nonnegative number");
  if (!(v_init >= 0.0) || !std::isfinite(v_init)) fail("v_init must be a finite nonnegative number");
  if (!(p_tc >= 0.0 && p_tc <= 1.0)) fail("p_tc must lie in [0, 1]");
  if ((algorithm == Algorithm::NStepTD || algorithm == Algorithm::TDLambda) && nstep < 1)
    fail("n-step horizon must be at least 1");
  if (algorithm == Algorithm::TDLambda && !(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (algorithm == Algorithm::TC && p_tc != 0.0 && p_tc != 1.0)
    fail("algorithm tc runs TC throughout; p_tc must be 0 or 1");
  if (algorithm == Algorithm::ReLUTD && p_tc > 0.0) fail("ReLU TD has no TC fine-tuning phase");
  if (coherence_reset_every > 0 && effective_p_tc() == 0.0)
    fail("coherence resets need a TC phase (p_tc > 0 or algorithm tc)");
  if (eval_every > 0 && eval_episodes == 0) fail("eval_every is set but eval_episodes is 0");
  if (workers < 1) fail("workers must be at least 1");
  if (exploration.initial < 0.0) fail("exploration level must be nonnegative");
  if (exploration.kind == Exploration::Kind::EpsilonGreedy && exploration.initial > 1.0)
    fail("epsilon must not exceed 1");
  double last_fraction = -1.0;
  double last_alpha = alpha;
  for (const auto& bp : lr_schedule) {
    if (!(bp.fraction >= 0.0 && bp.fraction <= 1.0)) fail("schedule fractions must lie in [0, 1]");
    if (bp.fraction <= last_fraction) fail("schedule fractions must increase");
    if (bp.alpha > last_alpha || bp.alpha < 0.0) fail("learning-rate schedule must be nonincreasing");
    last_fraction = bp.fraction;
    last_alpha = bp.alpha;
  }
}

std::uint64_t LearnerConfig::tc_start() const {
  const double p = effective_p_tc();
  return static_cast<std::uint64_t>(std::floor((1.0 - p) * static_cast<double>(total_episodes)));
}

double LearnerConfig::alpha_at(std::uint64_t episode) const {
  double a = alpha;
  for (const auto& bp : lr_schedule)
    if (episode >= static_cast<std::uint64_t>(std::floor(bp.fraction * static_cast<double>(total_episodes))))
      a = bp.alpha;
  return a;
}

LearnerConfig method_preset(std::string_view method) {
  LearnerConfig c;
  if (method == "td") return c;
  if (method == "tc") {
    c.algorithm = Algorithm::TC;
    return c;
  }
  if (method == "otd") {
    c.v_init = 320000;
    c.lr_schedule = {{0.5, 0.01}, {0.75, 0.001}};
    return c;
  }
  if (method == "otc") {
    c.algorithm = Algorithm::TC;
    c.v_init = 320000;
    return c;
  }
  if (method == "otd+tc") {
    c.v_init = 320000;
    c.p_tc = 0.10;
    return c;
  }
  throw std::invalid_argument("unknown method '" + std::string(method) + "'");
}

// ---------------------------------------------------------------------------
// Learner

Learner::Learner(NTupleNetwork& net, const AfterstateEvaluator& target, const LearnerConfig& cfg)
    : net_(net), value_(target), cfg_(cfg), alpha_(cfg.alpha) {
  if (cfg.algorithm == Algorithm::TC) set_phase(Phase::TC);
}

void Learner::set_phase(Phase p) {
  phase_ = p;
  if (p == Phase::TC) {
    net_.enable_coherence();
    alpha_ = cfg_.tc_alpha;
  }
}

int Learner::horizon() const {
  switch (cfg_.algorithm) {
    case Algorithm::NStepTD:
    case Algorithm::TDLambda: return cfg_.nstep;
    default: return 1;
  }
}

double Learner::target(std::span<const StepRecord> suffix) const {
  switch (cfg_.algorithm) {
    case Algorithm::NStepTD: return nstep_return(suffix, cfg_.nstep, value_);
    case Algorithm::TDLambda: return lambda_return(suffix, cfg_.lambda, cfg_.nstep, value_);
    case Algorithm::RectifiedTD:
    case Algorithm::ReLUTD:
      return suffix.empty() ? 0.0 : suffix[0].reward + rectified_value(value_, suffix[0].afterstate);
    case Algorithm::TD0:
    case Algorithm::TC: break;
  }
  return nstep_return(suffix, 1, value_);
}

std::optional<double> Learner::learn(std::span<const StepRecord> trajectory, std::size_t t) {
  const Board b = trajectory[t].afterstate;
  if (owns_ && !owns_(b)) return std::nullopt;
  const double current = net_.value(b);
  if (cfg_.algorithm == Algorithm::ReLUTD && current < 0.0) return std::nullopt;
  const double delta = target(trajectory.subspan(t + 1)) - current;
  if (phase_ == Phase::TC) {
    net_.tc_update(b, delta, alpha_);
  } else {
    net_.update(b, alpha_ * delta);
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Episodes

EpisodeResult run_episode(const Policy& policy, Learner* learner, Rng& rng, const EpisodeOptions& options) {
  EpisodeResult result;
  Board s = options.start ? *options.start : initial_state(rng);
  result.initial = s;
  std::vector<StepRecord> steps;
  const std::size_t horizon = learner ? static_cast<std::size_t>(learner->horizon()) : 0;
  const bool forward = options.order == UpdateOrder::Forward;

  while (auto d = policy(s, rng)) {
    const Board next = spawn_random(d->afterstate, rng);
    result.score += d->reward;
    ++result.moves;
    if (options.record) result.trajectory.push_back({s, d->action, d->reward, d->afterstate, next, false});
    if (learner) {
      steps.push_back({d->afterstate, d->reward});
      if (forward && steps.size() > horizon) learner->learn(steps, steps.size() - 1 - horizon);
    }
    s = next;
  }
  if (!result.trajectory.empty()) result.trajectory.back().next_terminal = true;
  result.max_exponent = s.max_exponent();

  if (learner && !steps.empty()) {
    if (forward) {
      const std::size_t first = steps.size() > horizon ? steps.size() - horizon : 0;
      for (std::size_t t = first; t < steps.size(); ++t) learner->learn(steps, t);
    } else {
      for (std::size_t t = steps.size(); t-- > 0;) learner->learn(steps, t);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training driver

void LearningCurve::write_csv(std::ostream& out) const {
  out << "episodes,avg_score,max_score,rate_2048,rate_8192,rate_16384,rate_32768\n";
  for (const auto& p : points) {
    out << p.episodes << ',' << p.avg_score << ',' << p.max_score;
    for (double r : p.rates) out << ',' << r;
    out << '\n';
  }
}

namespace {

class TrainingRun {
 public:
  TrainingRun(const LearnerConfig& cfg, NTupleNetwork& net, const AfterstateEvaluator& value,
              std::function<bool(Board)> owner, std::span<const Board> pool, const TrainHooks& hooks)
      : cfg_(cfg), net_(net), value_(value), owner_(std::move(owner)), pool_(pool), hooks_(hooks),
        rng_(cfg.seed), learner_(net, value, cfg) {
    learner_.set_owner(owner_);
  }

  LearningCurve run() {
    const std::uint64_t total = cfg_.total_episodes;
    const std::uint64_t tc_start = cfg_.tc_start();
    apply_boundary(0, tc_start);
    for (std::uint64_t e = 0; e < total;) {
      const std::uint64_t next = next_boundary(e, tc_start);
      play(e, next);
      e = next;
      on_boundary(e, tc_start);
    }
    return curve_;
  }

 private:
  std::uint64_t next_boundary(std::uint64_t e, std::uint64_t tc_start) const {
    const std::uint64_t total = cfg_.total_episodes;
    std::uint64_t nb = total;
    auto consider = [&](std::uint64_t x) {
      if (x > e && x < nb) nb = x;
    };
    if (cfg_.eval_every) consider((e / cfg_.eval_every + 1) * cfg_.eval_every);
    if (cfg_.coherence_reset_every) consider((e / cfg_.coherence_reset_every + 1) * cfg_.coherence_reset_every);
    consider(tc_start);
    for (const auto& bp : cfg_.lr_schedule)
      consider(static_cast<std::uint64_t>(std::floor(bp.fraction * static_cast<double>(total))));
    return nb;
  }

  void apply_boundary(std::uint64_t e, std::uint64_t tc_start) {
    if (learner_.phase() == Learner::Phase::TD) learner_.set_alpha(cfg_.alpha_at(e));
    if (e == tc_start && e < cfg_.total_episodes && learner_.phase() != Learner::Phase::TC)
      learner_.set_phase(Learner::Phase::TC);
  }

  void on_boundary(std::uint64_t e, std::uint64_t tc_start) {
    if (cfg_.eval_every && e % cfg_.eval_every == 0) evaluate_now(e);
    // Resets only mean something while TC runs.
    if (cfg_.coherence_reset_every && e % cfg_.coherence_reset_every == 0 && e > tc_start) {
      if (hooks_.on_snapshot) hooks_.on_snapshot(e, net_);
      ++curve_.snapshots;
      if (e < cfg_.total_episodes) net_.reset_coherence();
    }
    apply_boundary(e, tc_start);
  }

  void evaluate_now(std::uint64_t e) {
    EvalOptions opt;
    opt.episodes = cfg_.eval_episodes;
    opt.seed = Rng::mix(cfg_.seed ^ Rng::mix(e));
    opt.workers = cfg_.workers;
    const AfterstateEvaluator& v = value_;
    const EvalReport r = evaluate([&v] { return greedy_policy(v); }, opt);
    EvalPoint p;
    p.episodes = e;
    p.avg_score = r.avg_score;
    p.max_score = r.max_score;
    for (std::size_t i = 0; i < kCurveTiles.size(); ++i) p.rates[i] = r.rate(tile_value(kCurveTiles[i]));
    curve_.points.push_back(p);
    if (hooks_.on_eval) hooks_.on_eval(p);
  }

  Policy make_policy() {
    const AfterstateEvaluator& v = value_;
    const Exploration ex = cfg_.exploration;
    const double denom = static_cast<double>(std::max<std::uint64_t>(cfg_.total_episodes - 1, 1));
    if (ex.kind == Exploration::Kind::Greedy || ex.initial == 0.0) return greedy_policy(v);
    auto scale = std::make_shared<double>(0.0);
    auto seen = std::make_shared<std::uint64_t>(0);
    return [&v, ex, denom, this, scale, seen](Board s, Rng& rng) {
      const double progress = static_cast<double>(current_episode_.load(std::memory_order_relaxed)) / denom;
      auto d = select_action(v, s, ex, progress, rng, *scale > 0.0 ? *scale : 1.0);
      if (d) {
        // running mean of |r + V(s')|, the softmax temperature unit
        ++*seen;
        *scale += (std::abs(d->value) - *scale) / static_cast<double>(std::min<std::uint64_t>(*seen, 100000));
      }
      return d;
    };
  }

  EpisodeOptions episode_options(Rng& rng) const {
    EpisodeOptions o;
    o.order = cfg_.order;
    if (!pool_.empty()) o.start = pool_[rng.below(pool_.size())];
    return o;
  }

  void note_result(std::uint64_t e, const EpisodeResult& r) {
    if (r.max_exponent < 11) return;
    std::uint64_t cur = first_2048_.load(std::memory_order_relaxed);
    while (e < cur && !first_2048_.compare_exchange_weak(cur, e)) {}
  }

  void play(std::uint64_t begin, std::uint64_t end) {
    if (cfg_.workers == 1) {
      Policy policy = make_policy();
      for (std::uint64_t e = begin; e < end; ++e) {
        current_episode_.store(e, std::memory_order_relaxed);
        const EpisodeResult r = run_episode(policy, &learner_, rng_, episode_options(rng_));
        note_result(e, r);
        if (hooks_.on_episode) hooks_.on_episode(e, r, net_);
      }
    } else {
      std::atomic<std::uint64_t> next{begin};
      std::vector<std::jthread> threads;
      std::vector<Rng> streams;
      for (int w = 0; w < cfg_.workers; ++w) streams.push_back(rng_.split());
      for (int w = 0; w < cfg_.workers; ++w) {
        threads.emplace_back([&, w] {
          Rng& rng = streams[static_cast<std::size_t>(w)];
          Learner local = learner_;
          Policy policy = make_policy();
          for (std::uint64_t e; (e = next.fetch_add(1)) < end;) {
            current_episode_.store(e, std::memory_order_relaxed);
            note_result(e, run_episode(policy, &local, rng, episode_options(rng)));
          }
        });
      }
    }
    const std::uint64_t f = first_2048_.load();
    if (f != kNever) curve_.first_2048 = f;
  }

  static constexpr std::uint64_t kNever = ~std::uint64_t{0};

  const LearnerConfig& cfg_;
  NTupleNetwork& net_;
  const AfterstateEvaluator& value_;
  std::function<bool(Board)> owner_;
  std::span<const Board> pool_;
  const TrainHooks& hooks_;
  Rng rng_;
  Learner learner_;
  LearningCurve curve_;
  std::atomic<std::uint64_t> current_episode_{0};
  std::atomic<std::uint64_t> first_2048_{kNever};
};

}  // namespace

LearningCurve train(const LearnerConfig& cfg, NTupleNetwork& net, const TrainHooks& hooks) {
  cfg.validate();
  if (cfg.initialize) net.init_optimistic(cfg.v_init);
  TrainingRun run(cfg, net, net, {}, {}, hooks);
  return run.run();
}

LearningCurve multistage_train(const LearnerConfig& cfg, MultistageNetwork& msn, std::size_t stage,
                               std::span<const Board> start_pool, const TrainHooks& hooks) {
  cfg.validate();
  if (stage >= msn.stage_count()) throw std::invalid_argument("stage index out of range");
  if (stage > 0 && start_pool.empty()) throw std::invalid_argument("empty start pool for a later stage");
  NTupleNetwork& net = msn.stage(stage);
  if (cfg.initialize) net.init_optimistic(cfg.v_init);
  std::function<bool(Board)> owner;
  if (msn.stage_count() > 1)
    owner = [&msn, stage](Board b) { return msn.stage_select(b) == static_cast<int>(stage); };
  TrainingRun run(cfg, net, msn, std::move(owner), start_pool, hooks);
  return run.run();
}

std::vector<Board> harvest_stage_starts(const AfterstateEvaluator& v, const TileMultiset& threshold,
                                        std::uint64_t episodes, Rng& rng) {
  std::vector<Board> pool;
  for (std::uint64_t i = 0; i < episodes; ++i) {
    Board s = initial_state(rng);
    while (true) {
      if (threshold.contained_in(TileMultiset::of_board(s))) {
        pool.push_back(s);
        break;
      }
      const auto d = greedy_action(v, s);
      if (!d) break;
      s = spawn_random(d->afterstate, rng);
    }
  }
  return pool;
}

}  // namespace otdl
