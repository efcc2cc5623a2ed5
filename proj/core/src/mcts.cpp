#include "otdl/mcts.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace otdl {

void MctsConfig::validate() const {
  if (simulations < 1) throw std::invalid_argument("mcts simulations must be at least 1");
  if (!(c >= 0.0)) throw std::invalid_argument("mcts exploration constant must be nonnegative");
  if (!dynamic_vnorm && !(v_norm > 0.0)) throw std::invalid_argument("v_norm must be positive");
}

double ucb_score(double q, std::uint32_t parent_visits, std::uint32_t child_visits, double c) {
  if (child_visits == 0) return std::numeric_limits<double>::infinity();
  if (c == 0.0 || parent_visits == 0) return q;
  return q + c * std::sqrt(std::log(static_cast<double>(parent_visits)) / child_visits);
}

void MctsResult::write_csv(std::ostream& out, double r_th) const {
  std::uint32_t best = 0;
  for (Action a : kActions)
    if (legal.contains(a)) best = std::max(best, counts[static_cast<std::size_t>(a)]);
  out << "action,N,Q,filtered\n";
  for (Action a : kActions) {
    if (!legal.contains(a)) continue;
    const auto i = static_cast<std::size_t>(a);
    out << action_letter(a) << ',' << counts[i] << ',' << q[i] << ','
        << (counts[i] < r_th * best ? 1 : 0) << '\n';
  }
}

Mcts::Mcts(const AfterstateEvaluator& v, MctsConfig cfg) : v_(v), cfg_(cfg) { cfg_.validate(); }

std::optional<double> Mcts::expand_max(int node) {
  const Board s = nodes_[static_cast<std::size_t>(node)].board;
  const auto first = static_cast<std::int32_t>(nodes_.size());
  std::uint8_t count = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (Action a : kActions) {
    const SlideOutcome o = slide(s, a);
    if (!o.moved) continue;
    MctsNode child;
    child.kind = MctsNode::Kind::Chance;
    child.board = o.afterstate;
    child.reward = o.reward;
    child.action = a;
    child.afterstate_value = v_.value(o.afterstate);
    best = std::max(best, o.reward + child.afterstate_value);
    nodes_.push_back(std::move(child));
    ++count;
  }
  MctsNode& n = nodes_[static_cast<std::size_t>(node)];
  n.expanded = true;
  if (count == 0) {
    n.terminal = true;
    return std::nullopt;
  }
  n.first_child = first;
  n.child_count = count;
  return best;
}

int Mcts::select_child(int node) const {
  const MctsNode& n = nodes_[static_cast<std::size_t>(node)];
  std::uint32_t parent = 0;
  for (int k = 0; k < n.child_count; ++k) {
    const MctsNode& ch = nodes_[static_cast<std::size_t>(n.first_child + k)];
    if (ch.visits == 0) return n.first_child + k;  // unvisited first, canonical order
    parent += ch.visits;
  }
  int best = n.first_child;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n.child_count; ++k) {
    const MctsNode& ch = nodes_[static_cast<std::size_t>(n.first_child + k)];
    const double score = ucb_score(ch.mean(), parent, ch.visits, cfg_.c);
    if (score > best_score) {
      best_score = score;
      best = n.first_child + k;
    }
  }
  return best;
}

int Mcts::sample_spawn(int node, Rng& rng) {
  const Board after = nodes_[static_cast<std::size_t>(node)].board;
  const int empty = empty_count(after);
  const int cell = static_cast<int>(rng.below(static_cast<std::uint64_t>(empty)));
  const bool four = rng.uniform() < 0.1;
  const auto slot = static_cast<std::size_t>(2 * cell + (four ? 1 : 0));
  auto& children = nodes_[static_cast<std::size_t>(node)].spawn_children;
  if (children.empty()) children.assign(static_cast<std::size_t>(2 * empty), -1);
  if (children[slot] >= 0) return children[slot];
  MctsNode child;
  child.kind = MctsNode::Kind::Max;
  child.board = spawn_at(after, cell, four);
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(std::move(child));
  nodes_[static_cast<std::size_t>(node)].spawn_children[slot] = index;
  return index;
}

MctsResult Mcts::search(Board state, Rng& rng) {
  nodes_.clear();
  nodes_.reserve(static_cast<std::size_t>(cfg_.simulations) * 3 + 8);
  nodes_.push_back(MctsNode{});
  nodes_[0].board = state;

  MctsResult result;
  const std::optional<double> root_best = expand_max(0);
  if (!root_best) {
    result.tree_nodes = nodes_.size();
    return result;
  }
  v_norm_ = cfg_.dynamic_vnorm ? std::max(*root_best, 1.0) : cfg_.v_norm;
  nodes_[0].visits = 1;
  nodes_[0].value_sum = *root_best / v_norm_;

  std::vector<int> path;
  for (int iteration = 1; iteration < cfg_.simulations; ++iteration) {
    path.assign(1, 0);
    int node = 0;
    double rewards = 0.0;
    double value;
    while (true) {
      MctsNode& n = nodes_[static_cast<std::size_t>(node)];
      if (n.kind == MctsNode::Kind::Max) {
        if (n.terminal) {
          value = rewards / v_norm_;
          break;
        }
        if (!n.expanded) {
          const std::optional<double> best = expand_max(node);
          value = (rewards + best.value_or(0.0)) / v_norm_;
          break;
        }
        node = select_child(node);
        rewards += nodes_[static_cast<std::size_t>(node)].reward;
        path.push_back(node);
      } else {
        if (n.visits == 0) {
          // A chance leaf adopts the value stored when its parent expanded.
          n.expanded = true;
          value = (rewards + n.afterstate_value) / v_norm_;
          break;
        }
        node = sample_spawn(node, rng);
        path.push_back(node);
      }
    }
    for (int i : path) {
      MctsNode& n = nodes_[static_cast<std::size_t>(i)];
      ++n.visits;
      n.value_sum += value;
    }
  }

  const MctsNode& root = nodes_[0];
  result.root_visits = root.visits;
  result.v_norm = v_norm_;
  result.tree_nodes = nodes_.size();
  int best = -1;
  for (int k = 0; k < root.child_count; ++k) {
    const MctsNode& ch = nodes_[static_cast<std::size_t>(root.first_child + k)];
    const auto a = static_cast<std::size_t>(ch.action);
    result.legal.insert(ch.action);
    result.counts[a] = ch.visits;
    result.one_step[a] = ch.reward + ch.afterstate_value;
    result.q[a] = ch.visits ? ch.mean() : result.one_step[a] / v_norm_;
    if (best < 0) {
      best = k;
      continue;
    }
    const MctsNode& cur = nodes_[static_cast<std::size_t>(root.first_child + best)];
    bool better;
    if (ch.visits != cur.visits) better = ch.visits > cur.visits;
    else if (ch.visits == 0) better = ch.reward + ch.afterstate_value > cur.reward + cur.afterstate_value;
    else better = ch.mean() > cur.mean();
    if (better) best = k;
  }
  result.action = nodes_[static_cast<std::size_t>(root.first_child + best)].action;
  return result;
}

double mcts_training_target(const MctsResult& root, double current_value) {
  if (!root.action) return -current_value;  // terminal next state: target 0
  const auto a = static_cast<std::size_t>(*root.action);
  const double target = root.counts[a] ? root.q[a] * root.v_norm : root.one_step[a];
  return target - current_value;
}

std::vector<double> strength_probabilities(std::span<const std::uint32_t> counts, double z, double r_th) {
  std::vector<double> p(counts.size(), 0.0);
  if (counts.empty()) return p;
  std::uint32_t best = 0;
  for (auto n : counts) best = std::max(best, n);
  if (best == 0) {
    for (auto& x : p) x = 1.0 / static_cast<double>(p.size());
    return p;
  }
  std::vector<bool> keep(counts.size());
  bool zero_kept = false;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    keep[i] = !(counts[i] < r_th * best);
    zero_kept |= keep[i] && counts[i] == 0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!keep[i]) continue;
    if (z < 0.0 && zero_kept) {
      // N^z diverges at N = 0: the unvisited survivors share everything.
      p[i] = counts[i] == 0 ? 1.0 : 0.0;
    } else {
      // (N / N_best)^z equals N^z up to a common factor and cannot overflow.
      p[i] = std::pow(static_cast<double>(counts[i]) / best, z);
    }
    total += p[i];
  }
  for (auto& x : p) x /= total;
  return p;
}

std::size_t strength_sample(std::span<const std::uint32_t> counts, double z, double r_th, Rng& rng) {
  const std::vector<double> p = strength_probabilities(counts, z, r_th);
  double u = rng.uniform();
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    if (u < p[i]) return i;
    u -= p[i];
  }
  return last;
}

Action strength_policy(const MctsResult& root, double z, double r_th, Rng& rng) {
  if (!root.action) throw std::invalid_argument("strength policy on a terminal state");
  std::vector<Action> actions;
  std::vector<std::uint32_t> counts;
  for (Action a : kActions) {
    if (!root.legal.contains(a)) continue;
    actions.push_back(a);
    counts.push_back(root.counts[static_cast<std::size_t>(a)]);
  }
  return actions[strength_sample(counts, z, r_th, rng)];
}

Policy mcts_policy(const AfterstateEvaluator& v, const MctsConfig& cfg,
                   std::optional<std::pair<double, double>> strength) {
  auto search = std::make_shared<Mcts>(v, cfg);
  return [search, strength](Board s, Rng& rng) -> std::optional<Decision> {
    const MctsResult r = search->search(s, rng);
    if (!r.action) return std::nullopt;
    const Action a = strength ? strength_policy(r, strength->first, strength->second, rng) : *r.action;
    const SlideOutcome o = slide(s, a);
    return Decision{a, o.afterstate, o.reward, r.one_step[static_cast<std::size_t>(a)]};
  };
}

EpisodeResult mcts_training_episode(NTupleNetwork& net, const MctsConfig& cfg, double alpha, bool tc, Rng& rng) {
  if (tc) net.enable_coherence();
  Mcts search(net, cfg);
  EpisodeResult result;
  Board s = initial_state(rng);
  result.initial = s;
  MctsResult root = search.search(s, rng);
  std::optional<Board> previous;  // s'_{t-1}
  while (true) {
    if (previous) {
      const double delta = mcts_training_target(root, net.value(*previous));
      if (tc) net.tc_update(*previous, delta, alpha);
      else net.update(*previous, alpha * delta);
    }
    if (!root.action) break;
    const SlideOutcome o = slide(s, *root.action);
    result.score += o.reward;
    ++result.moves;
    previous = o.afterstate;
    s = spawn_random(o.afterstate, rng);
    root = search.search(s, rng);
  }
  result.max_exponent = s.max_exponent();
  return result;
}

}  // namespace otdl
