#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "otdl/board.hpp"
#include "otdl/network.hpp"
#include "otdl/policy.hpp"

namespace otdl {

struct SearchConfig {
  /// Number of chance layers below the root; 1 is a greedy one-step search.
  int depth = 1;
  bool use_tt = false;
  std::size_t tt_capacity = std::size_t{1} << 20;  // entries, power of two
  /// Leaves contribute max(V, 0) and every nonterminal max node adds 1.
  bool rectified = false;
  /// Root tile-downgrading activates when the board contains these tiles.
  std::optional<TileMultiset> downgrade_threshold;

  void validate() const;
};

enum class NodeKind : std::uint8_t { Max = 0, Chance = 1 };

/// Direct-mapped cache keyed by (board, node kind, remaining depth). A value is
/// returned only on an exact key match, so a collision costs work, never
/// correctness.
class TranspositionTable {
 public:
  explicit TranspositionTable(std::size_t capacity);

  std::optional<double> lookup(Board b, NodeKind kind, int depth) const;
  void store(Board b, NodeKind kind, int depth, double value);
  void clear();
  std::size_t capacity() const { return entries_.size(); }

  static std::uint64_t hash(Board b, NodeKind kind, int depth);

 private:
  struct Entry {
    std::uint64_t board = 0;
    std::uint32_t tag = 0;  // 0 = empty, else (depth << 2 | kind << 1 | 1)
    double value = 0.0;
  };
  static std::uint32_t tag_of(NodeKind kind, int depth) {
    return (static_cast<std::uint32_t>(depth) << 2) | (static_cast<std::uint32_t>(kind) << 1) | 1u;
  }

  std::vector<Entry> entries_;
  std::uint64_t mask_;
};

struct SearchResult {
  std::optional<Action> action;
  double value = 0.0;
  /// Max and chance nodes evaluated, leaves included; cache hits excluded.
  std::uint64_t nodes = 0;
  /// r + V_chance(s', p - 1) per action; meaningful for legal actions only.
  std::array<double, 4> action_values{};
  ActionSet legal;
  /// Set when the decision was taken on a downgraded copy of the root.
  std::optional<Board> downgraded;
};

/// Fixed-depth expectimax over an afterstate value function.
class Expectimax {
 public:
  Expectimax(const AfterstateEvaluator& v, SearchConfig cfg, const Geometry& geometry = Geometry::standard());

  /// Best action and value at the configured depth (no downgrading).
  SearchResult search(Board state);
  SearchResult search(Board state, int depth);
  /// Root decision honoring cfg.downgrade_threshold.
  SearchResult decide(Board state);

  double max_value(Board state, int depth);
  double chance_value(Board afterstate, int depth);

  const SearchConfig& config() const { return cfg_; }
  std::uint64_t nodes() const { return nodes_; }
  TranspositionTable* table() { return tt_.get(); }

 private:
  double leaf(Board afterstate) const;

  const AfterstateEvaluator& v_;
  SearchConfig cfg_;
  const Geometry& geometry_;
  bool fast_;
  std::unique_ptr<TranspositionTable> tt_;
  std::uint64_t nodes_ = 0;
};

/// Halves every tile above the largest tile value missing from the board
/// (and below its maximum). nullopt when no tile value is missing.
std::optional<Board> downgrade(Board state, int cells = 16);

/// Expectimax player; each policy instance owns its search and cache.
Policy expectimax_policy(const AfterstateEvaluator& v, const SearchConfig& cfg);

}  // namespace otdl
