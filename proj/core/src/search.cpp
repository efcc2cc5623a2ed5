#include "otdl/search.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <stdexcept>

namespace otdl {

void SearchConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("search depth must be at least 1");
  if (use_tt && (tt_capacity == 0 || !std::has_single_bit(tt_capacity)))
    throw std::invalid_argument("tt capacity must be a power of two");
}

// ---------------------------------------------------------------------------
// Transposition table

TranspositionTable::TranspositionTable(std::size_t capacity) {
  if (capacity == 0 || !std::has_single_bit(capacity))
    throw std::invalid_argument("tt capacity must be a power of two");
  entries_.resize(capacity);
  mask_ = capacity - 1;
}

std::uint64_t TranspositionTable::hash(Board b, NodeKind kind, int depth) {
  // MurmurHash3 64-bit finalizer over the board mixed with kind and depth.
  std::uint64_t k = b.raw() ^ (static_cast<std::uint64_t>(tag_of(kind, depth)) * 0x9e3779b97f4a7c15ULL);
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

std::optional<double> TranspositionTable::lookup(Board b, NodeKind kind, int depth) const {
  const Entry& e = entries_[hash(b, kind, depth) & mask_];
  if (e.tag == tag_of(kind, depth) && e.board == b.raw()) return e.value;
  return std::nullopt;
}

void TranspositionTable::store(Board b, NodeKind kind, int depth, double value) {
  entries_[hash(b, kind, depth) & mask_] = {b.raw(), tag_of(kind, depth), value};
}

void TranspositionTable::clear() { std::fill(entries_.begin(), entries_.end(), Entry{}); }

// ---------------------------------------------------------------------------
// Expectimax

Expectimax::Expectimax(const AfterstateEvaluator& v, SearchConfig cfg, const Geometry& geometry)
    : v_(v), cfg_(std::move(cfg)), geometry_(geometry), fast_(geometry.is_standard()) {
  cfg_.validate();
  if (cfg_.use_tt) tt_ = std::make_unique<TranspositionTable>(cfg_.tt_capacity);
}

double Expectimax::leaf(Board afterstate) const {
  const double v = v_.value(afterstate);
  return cfg_.rectified ? std::max(v, 0.0) : v;
}

double Expectimax::max_value(Board state, int depth) {
  if (tt_)
    if (auto hit = tt_->lookup(state, NodeKind::Max, depth)) return *hit;
  ++nodes_;
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (Action a : kActions) {
    const SlideOutcome o = fast_ ? slide(state, a) : geometry_.slide(state, a);
    if (!o.moved) continue;
    any = true;
    best = std::max(best, o.reward + chance_value(o.afterstate, depth - 1));
  }
  const double value = any ? best + (cfg_.rectified ? 1.0 : 0.0) : 0.0;
  if (tt_) tt_->store(state, NodeKind::Max, depth, value);
  return value;
}

double Expectimax::chance_value(Board afterstate, int depth) {
  if (depth <= 0) {
    ++nodes_;
    return leaf(afterstate);
  }
  if (tt_)
    if (auto hit = tt_->lookup(afterstate, NodeKind::Chance, depth)) return *hit;
  ++nodes_;
  const int cells = geometry_.cells();
  int empty = 0;
  for (int i = 0; i < cells; ++i) empty += afterstate.at(i) == 0;
  double sum = 0.0;
  if (empty > 0) {
    const double p2 = 0.9 / empty;
    const double p4 = 0.1 / empty;
    for (int i = 0; i < cells; ++i) {
      if (afterstate.at(i) != 0) continue;
      Board two = afterstate;
      two.set(i, 1);
      Board four = afterstate;
      four.set(i, 2);
      sum += p2 * max_value(two, depth) + p4 * max_value(four, depth);
    }
  }
  if (tt_) tt_->store(afterstate, NodeKind::Chance, depth, sum);
  return sum;
}

SearchResult Expectimax::search(Board state) { return search(state, cfg_.depth); }

SearchResult Expectimax::search(Board state, int depth) {
  if (depth < 1) throw std::invalid_argument("search depth must be at least 1");
  SearchResult r;
  const std::uint64_t before = nodes_;
  ++nodes_;  // the root max node
  double best = -std::numeric_limits<double>::infinity();
  for (Action a : kActions) {
    const SlideOutcome o = fast_ ? slide(state, a) : geometry_.slide(state, a);
    if (!o.moved) continue;
    r.legal.insert(a);
    const double v = o.reward + chance_value(o.afterstate, depth - 1);
    r.action_values[static_cast<std::size_t>(a)] = v;
    if (v > best) {
      best = v;
      r.action = a;
    }
  }
  r.value = r.action ? best + (cfg_.rectified ? 1.0 : 0.0) : 0.0;
  r.nodes = nodes_ - before;
  return r;
}

SearchResult Expectimax::decide(Board state) {
  if (cfg_.downgrade_threshold &&
      cfg_.downgrade_threshold->contained_in(TileMultiset::of_board(state, geometry_.cells()))) {
    if (auto lowered = downgrade(state, geometry_.cells())) {
      SearchResult r = search(*lowered);
      r.downgraded = lowered;
      return r;
    }
  }
  return search(state);
}

std::optional<Board> downgrade(Board state, int cells) {
  std::uint32_t present = 0;
  int top = 0;
  for (int i = 0; i < cells; ++i) {
    const int e = state.at(i);
    present |= 1u << e;
    top = std::max(top, e);
  }
  int missing = 0;
  for (int e = top - 1; e >= 1; --e) {
    if (!(present & (1u << e))) {
      missing = e;
      break;
    }
  }
  if (missing == 0) return std::nullopt;
  Board out = state;
  for (int i = 0; i < cells; ++i)
    if (state.at(i) > missing) out.set(i, state.at(i) - 1);
  return out;
}

Policy expectimax_policy(const AfterstateEvaluator& v, const SearchConfig& cfg) {
  auto search = std::make_shared<Expectimax>(v, cfg);
  return [search](Board s, Rng&) -> std::optional<Decision> {
    const SearchResult r = search->decide(s);
    if (!r.action) return std::nullopt;
    const SlideOutcome o = slide(s, *r.action);
    return Decision{*r.action, o.afterstate, o.reward, r.action_values[static_cast<std::size_t>(*r.action)]};
  };
}

}  // namespace otdl
