#include "otdl/policy.hpp"

#include <array>
#include <cmath>

namespace otdl {

namespace {

int expand(const AfterstateEvaluator* v, Board state, const Geometry& g, std::array<Decision, 4>& out) {
  int n = 0;
  for (Action a : kActions) {
    const SlideOutcome o = g.slide(state, a);
    if (!o.moved) continue;
    const double future = v ? v->value(o.afterstate) : 0.0;
    out[static_cast<std::size_t>(n++)] = {a, o.afterstate, o.reward, o.reward + future};
  }
  return n;
}

const Decision& best_of(const std::array<Decision, 4>& options, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (options[static_cast<std::size_t>(i)].value > options[static_cast<std::size_t>(best)].value) best = i;
  return options[static_cast<std::size_t>(best)];
}

}  // namespace

std::optional<Decision> greedy_action(const AfterstateEvaluator& v, Board state, const Geometry& geometry) {
  std::array<Decision, 4> options;
  const int n = expand(&v, state, geometry, options);
  if (n == 0) return std::nullopt;
  return best_of(options, n);
}

std::optional<Decision> select_action(const AfterstateEvaluator& v, Board state,
                                      const Exploration& exploration, double progress, Rng& rng,
                                      double value_scale) {
  std::array<Decision, 4> options;
  const int n = expand(&v, state, Geometry::standard(), options);
  if (n == 0) return std::nullopt;
  const double level = exploration.initial * std::max(0.0, 1.0 - progress);

  switch (exploration.kind) {
    case Exploration::Kind::Greedy:
      break;
    case Exploration::Kind::EpsilonGreedy:
      if (level > 0.0 && rng.uniform() < level)
        return options[rng.below(static_cast<std::uint64_t>(n))];
      break;
    case Exploration::Kind::Softmax: {
      if (level <= 0.0) break;
      const Decision& best = best_of(options, n);
      const double scale = level * std::max(value_scale, 1e-12);
      std::array<double, 4> weight{};
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        weight[k] = std::exp((options[k].value - best.value) / scale);
        total += weight[k];
      }
      double u = rng.uniform() * total;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (u < weight[k]) return options[k];
        u -= weight[k];
      }
      return options[static_cast<std::size_t>(n - 1)];
    }
  }
  return best_of(options, n);
}

std::optional<Decision> random_action(Board state, Rng& rng) {
  std::array<Decision, 4> options;
  const int n = expand(nullptr, state, Geometry::standard(), options);
  if (n == 0) return std::nullopt;
  return options[rng.below(static_cast<std::uint64_t>(n))];
}

Policy greedy_policy(const AfterstateEvaluator& v) {
  return [&v](Board s, Rng&) { return greedy_action(v, s); };
}

Policy random_policy() {
  return [](Board s, Rng& rng) { return random_action(s, rng); };
}

Policy max_reward_policy() {
  return [](Board s, Rng&) {
    std::array<Decision, 4> options;
    const int n = expand(nullptr, s, Geometry::standard(), options);
    if (n == 0) return std::optional<Decision>{};
    return std::optional<Decision>{best_of(options, n)};
  };
}

}  // namespace otdl
