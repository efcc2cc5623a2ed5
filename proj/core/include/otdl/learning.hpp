#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otdl/board.hpp"
#include "otdl/network.hpp"
#include "otdl/policy.hpp"
#include "otdl/rng.hpp"

namespace otdl {

/// One move of an episode: s_t --a_t--> s'_t (reward r_t) --spawn--> s_{t+1}.
struct Transition {
  Board state;
  Action action = Action::Up;
  std::uint32_t reward = 0;
  Board afterstate;
  Board next_state;
  bool next_terminal = false;
};

/// (s'_k, r_k) pairs as seen by the afterstate learning targets.
struct StepRecord {
  Board afterstate;
  std::uint32_t reward = 0;
};

/// The move made from s_{t+1}, i.e. what a TD(0) target bootstraps from.
struct NextStep {
  std::uint32_t reward = 0;
  Board afterstate;
};

// ---------------------------------------------------------------------------
// Returns (gamma = 1). `suffix` holds steps t+1, t+2, ... up to the end of
// the episode; an empty suffix means s_{t+1} was terminal.

/// r_{t+1} + ... + r_{t+n} + V(s'_{t+n}); the plain sum of the remaining
/// rewards when fewer than n steps follow.
double nstep_return(std::span<const StepRecord> suffix, int n, const AfterstateEvaluator& v);

/// (1 - lambda) * sum_{k<n} lambda^{k-1} R^(k) + lambda^{n-1} R^(n).
double lambda_return(std::span<const StepRecord> suffix, double lambda, int horizon,
                     const AfterstateEvaluator& v);

/// max(V(s'), 0).
double rectified_value(const AfterstateEvaluator& v, Board afterstate);

// ---------------------------------------------------------------------------
// Single-step update rules. Each returns the TD error it applied.

double td0_update(NTupleNetwork& net, const Transition& step, const std::optional<NextStep>& next,
                  double alpha);
void tc_update(NTupleNetwork& net, Board afterstate, double delta, double alpha);
double rectified_td_update(NTupleNetwork& net, const Transition& step,
                           const std::optional<NextStep>& next, double alpha);
/// Returns nullopt (and leaves the weights alone) when V(s'_t) < 0.
std::optional<double> relu_td_update(NTupleNetwork& net, const Transition& step,
                                     const std::optional<NextStep>& next, double alpha);

// ---------------------------------------------------------------------------
// Configuration

enum class Algorithm { TD0, NStepTD, TDLambda, TC, RectifiedTD, ReLUTD };
enum class UpdateOrder { Forward, Backward };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct LrBreakpoint {
  double fraction = 0.0;  // of total episodes
  double alpha = 0.0;
};

struct LearnerConfig {
  Algorithm algorithm = Algorithm::TD0;
  int nstep = 1;          // NStepTD n, TDLambda horizon
  double lambda = 0.5;    // TDLambda
  double alpha = 0.1;     // TD-phase base learning rate
  double tc_alpha = 1.0;  // learning rate of the TC phase
  double v_init = 0.0;
  /// Fraction of episodes (at the end) run as the TC fine-tuning phase.
  /// Algorithm::TC implies 1.
  double p_tc = 0.0;
  std::vector<LrBreakpoint> lr_schedule;
  Exploration exploration;
  UpdateOrder order = UpdateOrder::Backward;
  std::uint64_t total_episodes = 1000;
  std::uint64_t eval_every = 0;  // 0 disables periodic evaluation
  std::uint64_t eval_episodes = 0;
  std::uint64_t coherence_reset_every = 0;  // 0 disables resets
  int workers = 1;
  std::uint64_t seed = 1;
  /// Apply init_optimistic(v_init) before episode 0.
  bool initialize = true;

  /// Throws std::invalid_argument describing the first contradiction found.
  void validate() const;
  double effective_p_tc() const { return algorithm == Algorithm::TC ? 1.0 : p_tc; }
  /// First episode index of the TC phase.
  std::uint64_t tc_start() const;
  /// TD-phase learning rate in effect at `episode`.
  double alpha_at(std::uint64_t episode) const;
};

/// Defaults mirroring the published settings: "td", "otd", "otc", "otd+tc".
LearnerConfig method_preset(std::string_view method);

// ---------------------------------------------------------------------------
// Learner

/// Applies one configured update rule to the afterstates of an episode.
class Learner {
 public:
  enum class Phase { TD, TC };

  /// `target` supplies V for bootstrap terms (the routing multistage
  /// network, or `net` itself); only afterstates accepted by `owns` are
  /// updated.
  Learner(NTupleNetwork& net, const AfterstateEvaluator& target, const LearnerConfig& cfg);
  explicit Learner(NTupleNetwork& net, const LearnerConfig& cfg) : Learner(net, net, cfg) {}

  void set_phase(Phase p);
  Phase phase() const { return phase_; }
  void set_alpha(double a) { alpha_ = a; }
  double alpha() const { return alpha_; }
  void set_owner(std::function<bool(Board)> owns) { owns_ = std::move(owns); }

  /// Steps of lookahead a target needs before it can be formed.
  int horizon() const;

  /// Updates V(trajectory[t].afterstate) using the steps after t. Returns the
  /// TD error applied, or nullopt when the step was skipped.
  std::optional<double> learn(std::span<const StepRecord> trajectory, std::size_t t);

  NTupleNetwork& network() { return net_; }

 private:
  double target(std::span<const StepRecord> suffix) const;

  NTupleNetwork& net_;
  const AfterstateEvaluator& value_;
  LearnerConfig cfg_;
  Phase phase_ = Phase::TD;
  double alpha_;
  std::function<bool(Board)> owns_;
};

// ---------------------------------------------------------------------------
// Episodes

struct EpisodeResult {
  std::uint64_t score = 0;
  int max_exponent = 0;
  std::uint64_t moves = 0;
  Board initial;
  std::vector<Transition> trajectory;  // filled when recording is requested
};

struct EpisodeOptions {
  std::optional<Board> start;  // default: initial_state(rng)
  bool record = false;
  UpdateOrder order = UpdateOrder::Backward;
};

/// Plays one game with `policy`; when `learner` is given, applies its updates
/// in the requested order.
EpisodeResult run_episode(const Policy& policy, Learner* learner, Rng& rng,
                          const EpisodeOptions& options = {});

// ---------------------------------------------------------------------------
// Training

struct EvalPoint {
  std::uint64_t episodes = 0;
  double avg_score = 0.0;
  std::uint64_t max_score = 0;
  std::array<double, 4> rates{};  // 2048, 8192, 16384, 32768
  friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct LearningCurve {
  std::vector<EvalPoint> points;
  /// Training episode index (0-based) of the first 2048-tile, if any.
  std::optional<std::uint64_t> first_2048;
  std::uint64_t snapshots = 0;

  void write_csv(std::ostream& out) const;
  friend bool operator==(const LearningCurve&, const LearningCurve&) = default;
};

inline constexpr std::array<int, 4> kCurveTiles{11, 13, 14, 15};

struct TrainHooks {
  /// Called with the network just before each coherence reset.
  std::function<void(std::uint64_t episode, const NTupleNetwork&)> on_snapshot;
  std::function<void(const EvalPoint&)> on_eval;
  /// Called after every training episode (single worker only).
  std::function<void(std::uint64_t episode, const EpisodeResult&, const NTupleNetwork&)> on_episode;
};

LearningCurve train(const LearnerConfig& cfg, NTupleNetwork& net, const TrainHooks& hooks = {});

/// Trains stage `stage` (0-based) from boards drawn uniformly from
/// `start_pool`; stage 0 with an empty pool starts from initial states.
/// Throws std::invalid_argument when a later stage has no start states.
LearningCurve multistage_train(const LearnerConfig& cfg, MultistageNetwork& msn, std::size_t stage,
                               std::span<const Board> start_pool, const TrainHooks& hooks = {});

/// Greedy self-play; collects the first state of each episode whose tiles
/// contain `threshold`.
std::vector<Board> harvest_stage_starts(const AfterstateEvaluator& v, const TileMultiset& threshold,
                                        std::uint64_t episodes, Rng& rng);

}  // namespace otdl
