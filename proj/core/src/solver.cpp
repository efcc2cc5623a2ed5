#include "otdl/solver.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace otdl {

SmallGameSolver::SmallGameSolver(const Geometry& geometry) : geometry_(geometry) {
  if (geometry.cells() > 12) throw std::invalid_argument("exhaustive solving supports small boards only");
}

const SolvedValue& SmallGameSolver::state(Board s) {
  if (auto it = states_.find(s.raw()); it != states_.end()) return it->second;
  SolvedValue v;
  bool any = false;
  int deepest = 0;
  v.expected = v.best = v.worst = -std::numeric_limits<double>::infinity();
  for (Action a : kActions) {
    const SlideOutcome o = geometry_.slide(s, a);
    if (!o.moved) continue;
    any = true;
    const SolvedValue& c = afterstate(o.afterstate);
    v.expected = std::max(v.expected, o.reward + c.expected);
    v.best = std::max(v.best, o.reward + c.best);
    v.worst = std::max(v.worst, o.reward + c.worst);
    deepest = std::max(deepest, c.depth_needed);
  }
  if (!any) v = SolvedValue{};
  else v.depth_needed = 1 + deepest;
  // The game graph is acyclic (tile sum grows), so children are final here.
  return states_.emplace(s.raw(), v).first->second;
}

const SolvedValue& SmallGameSolver::afterstate(Board s) {
  if (auto it = afterstates_.find(s.raw()); it != afterstates_.end()) return it->second;
  const SpawnDistribution successors = geometry_.spawn_successors(s);
  if (successors.empty()) throw std::invalid_argument("afterstate without an empty cell");
  SolvedValue v;
  v.best = -std::numeric_limits<double>::infinity();
  v.worst = std::numeric_limits<double>::infinity();
  int deepest = 1;
  for (const Successor& next : successors) {
    const SolvedValue& c = state(next.board);
    v.expected += next.probability * c.expected;
    v.best = std::max(v.best, c.best);
    v.worst = std::min(v.worst, c.worst);
    deepest = std::max(deepest, c.depth_needed);
  }
  v.depth_needed = deepest;
  return afterstates_.emplace(s.raw(), v).first->second;
}

void SmallGameSolver::solve_all() {
  const int cells = geometry_.cells();
  for (int i = 0; i < cells; ++i) {
    for (int ei : {1, 2}) {
      Board one;
      one.set(i, ei);
      for (int j = 0; j < cells; ++j) {
        if (j == i) continue;
        for (int ej : {1, 2}) {
          Board two = one;
          two.set(j, ej);
          state(two);
        }
      }
    }
  }
}

void SmallGameSolver::write_csv(std::ostream& out) const {
  struct Row {
    std::uint64_t board;
    int kind;
    const SolvedValue* v;
  };
  std::vector<Row> rows;
  rows.reserve(states_.size() + afterstates_.size());
  for (const auto& [b, v] : states_) rows.push_back({b, 0, &v});
  for (const auto& [b, v] : afterstates_) rows.push_back({b, 1, &v});
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.board != b.board ? a.board < b.board : a.kind < b.kind; });
  const int digits = geometry_.cells();
  out << "board,kind,expected,best,worst\n";
  char buf[160];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof buf, "%0*llx,%s,%.17g,%.17g,%.17g\n", digits,
                  static_cast<unsigned long long>(r.board), r.kind == 0 ? "state" : "afterstate",
                  r.v->expected, r.v->best, r.v->worst);
    out << buf;
  }
}

}  // namespace otdl
