#pragma once

#include <functional>
#include <optional>

#include "otdl/board.hpp"
#include "otdl/network.hpp"
#include "otdl/rng.hpp"

namespace otdl {

/// A chosen move: the action, its afterstate and reward, and the score the
/// chooser assigned to it (r + V(s') for greedy play).
struct Decision {
  Action action = Action::Up;
  Board afterstate;
  std::uint32_t reward = 0;
  double value = 0.0;
};

/// Move chooser for a state; returns nullopt only for terminal states.
using Policy = std::function<std::optional<Decision>(Board state, Rng& rng)>;

struct Exploration {
  enum class Kind { Greedy, EpsilonGreedy, Softmax };
  Kind kind = Kind::Greedy;
  /// epsilon_init or T_init; decays linearly to 0 with training progress.
  double initial = 0.0;
};

/// argmax over legal actions of r + V(s'); ties keep the earlier action in
/// Up, Right, Down, Left order.
std::optional<Decision> greedy_action(const AfterstateEvaluator& v, Board state,
                                      const Geometry& geometry = Geometry::standard());

/// Exploring action choice. `progress` in [0, 1] scales the exploration
/// level by (1 - progress). Softmax divides r + V(s') by T * value_scale.
std::optional<Decision> select_action(const AfterstateEvaluator& v, Board state,
                                      const Exploration& exploration, double progress, Rng& rng,
                                      double value_scale = 1.0);

/// Uniformly random legal move.
std::optional<Decision> random_action(Board state, Rng& rng);

Policy greedy_policy(const AfterstateEvaluator& v);
Policy random_policy();
/// Always takes the move with the largest immediate reward.
Policy max_reward_policy();

}  // namespace otdl
