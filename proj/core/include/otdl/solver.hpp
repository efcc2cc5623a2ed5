#pragma once

#include <cstdint>
#include <iosfwd>
#include <unordered_map>

#include "otdl/board.hpp"
#include "otdl/search.hpp"

namespace otdl {

/// Exact game values of one node. `best` lets the environment place the tile
/// that is best for the player, `worst` the one that is worst; the player
/// always maximizes.
struct SolvedValue {
  double expected = 0.0;
  double best = 0.0;
  double worst = 0.0;
  /// Smallest expectimax depth at which the search reaches no leaf below
  /// this node, i.e. at which expectimax returns `expected` exactly.
  int depth_needed = 0;
};

/// Memoized exhaustive solver for the 2x3 game. States and afterstates are
/// cached separately and never alias.
class SmallGameSolver {
 public:
  explicit SmallGameSolver(const Geometry& geometry = Geometry::small());

  const SolvedValue& state(Board s);
  const SolvedValue& afterstate(Board s);

  /// Solves every state reachable from every initial position.
  void solve_all();

  std::size_t state_count() const { return states_.size(); }
  std::size_t afterstate_count() const { return afterstates_.size(); }
  const Geometry& geometry() const { return geometry_; }

  /// CSV with header board,kind,expected,best,worst; rows sorted by board
  /// then kind so output is reproducible.
  void write_csv(std::ostream& out) const;

 private:
  const Geometry& geometry_;
  std::unordered_map<std::uint64_t, SolvedValue> states_;
  std::unordered_map<std::uint64_t, SolvedValue> afterstates_;
};

/// The evaluator that returns solved expected afterstate values; greedy play
/// on it is optimal.
class SolvedEvaluator final : public AfterstateEvaluator {
 public:
  explicit SolvedEvaluator(SmallGameSolver& solver) : solver_(solver) {}
  double value(Board afterstate) const override { return solver_.afterstate(afterstate).expected; }

 private:
  SmallGameSolver& solver_;
};

}  // namespace otdl
