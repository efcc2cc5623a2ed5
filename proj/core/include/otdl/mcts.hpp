#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "otdl/board.hpp"
#include "otdl/learning.hpp"
#include "otdl/network.hpp"
#include "otdl/policy.hpp"
#include "otdl/rng.hpp"

namespace otdl {

struct MctsConfig {
  int simulations = 100;
  double c = 0.005;
  /// Static normalization in points; ignored when `dynamic_vnorm` is set.
  double v_norm = 400000.0;
  /// V_norm = max(max_a (r + V(s')), 1) at the root of each search.
  bool dynamic_vnorm = false;

  void validate() const;
};

/// Node of the search tree. Max nodes hold states, chance nodes afterstates.
struct MctsNode {
  enum class Kind : std::uint8_t { Max, Chance };

  Kind kind = Kind::Max;
  Board board;
  std::uint32_t visits = 0;
  double value_sum = 0.0;  // normalized units
  bool expanded = false;
  bool terminal = false;
  /// Max node: reward of the edge into each child. Chance node: unused.
  std::uint32_t reward = 0;
  /// Chance node: V(s') computed when its parent was expanded.
  double afterstate_value = 0.0;
  /// Max node: the action leading to this child from its parent.
  Action action = Action::Up;
  std::int32_t first_child = -1;  // max node: contiguous children
  std::uint8_t child_count = 0;
  /// Chance node: lazily created children, indexed by spawn slot
  /// (2 * empty_index + four); -1 = not yet created.
  std::vector<std::int32_t> spawn_children;

  double mean() const { return visits ? value_sum / visits : 0.0; }
};

/// UCB score Q + c * sqrt(ln N(s) / N(s, a)); +inf for unvisited children.
double ucb_score(double q, std::uint32_t parent_visits, std::uint32_t child_visits, double c);

struct MctsResult {
  std::optional<Action> action;
  ActionSet legal;
  std::array<std::uint32_t, 4> counts{};  // child visit counts N(s, a)
  std::array<double, 4> q{};              // mean normalized value per action
  /// r + V(s') per action from the root expansion.
  std::array<double, 4> one_step{};
  std::uint32_t root_visits = 0;
  double v_norm = 1.0;
  std::size_t tree_nodes = 0;

  /// Root statistics as CSV rows: action,N,Q,filtered.
  void write_csv(std::ostream& out, double r_th = 0.0) const;
};

/// Single-player MCTS over an afterstate value function.
class Mcts {
 public:
  Mcts(const AfterstateEvaluator& v, MctsConfig cfg);

  /// Runs cfg.simulations iterations from `state`. The first iteration
  /// evaluates the root itself. The chosen action maximizes N(s, a); ties
  /// go to the larger mean value (the one-step estimate for unvisited
  /// children), then canonical order.
  MctsResult search(Board state, Rng& rng);

  const std::vector<MctsNode>& nodes() const { return nodes_; }

 private:
  int select_child(int node) const;
  int sample_spawn(int node, Rng& rng);
  /// Creates all afterstate children; returns max_a (r + V(s')), or nullopt
  /// when the state is terminal.
  std::optional<double> expand_max(int node);

  const AfterstateEvaluator& v_;
  MctsConfig cfg_;
  std::vector<MctsNode> nodes_;
  double v_norm_ = 1.0;
};

/// TD error with an MCTS target: Q(s_{t+1}, a_{t+1}) * V_norm - V(s'_t), where
/// a_{t+1} is the chosen root action. Unvisited actions use r + V(s').
double mcts_training_target(const MctsResult& root, double current_value);

/// Probabilities N^z / sum N^z over actions surviving the threshold filter
/// N(a) >= r_th * N(a_best). Indices follow `counts`.
std::vector<double> strength_probabilities(std::span<const std::uint32_t> counts, double z, double r_th);

/// Samples an index of `counts` from strength_probabilities.
std::size_t strength_sample(std::span<const std::uint32_t> counts, double z, double r_th, Rng& rng);

/// Samples a root action from a completed search with the strength policy.
Action strength_policy(const MctsResult& root, double z, double r_th, Rng& rng);

/// MCTS player; `strength` enables the softmax strength policy (z, R_th).
Policy mcts_policy(const AfterstateEvaluator& v, const MctsConfig& cfg,
                   std::optional<std::pair<double, double>> strength = std::nullopt);

/// One training episode where moves come from MCTS and each afterstate
/// value is moved toward the MCTS value of the next state.
EpisodeResult mcts_training_episode(NTupleNetwork& net, const MctsConfig& cfg, double alpha, bool tc, Rng& rng);

}  // namespace otdl
