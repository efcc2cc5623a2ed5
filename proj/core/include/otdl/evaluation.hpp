#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "otdl/learning.hpp"
#include "otdl/policy.hpp"

namespace otdl {

/// Exponents of the tiles whose reach rates are reported (2048 ... 32768).
inline constexpr std::array<int, 5> kReportTiles{11, 12, 13, 14, 15};

struct EvalReport {
  std::uint64_t episodes = 0;
  double avg_score = 0.0;
  double score_ci = 0.0;  // 95% half-width
  std::uint64_t max_score = 0;
  std::array<double, 5> reach_rate{};
  std::array<double, 5> reach_ci{};
  std::uint64_t moves = 0;
  double seconds = 0.0;
  double moves_per_second = 0.0;
  /// Per-run average scores when several runs were combined.
  std::vector<double> run_means;

  /// Reach rate for a tile value in kReportTiles (e.g. 2048).
  double rate(std::uint32_t tile) const;
  void write_text(std::ostream& out) const;
};

/// Makes one policy per worker, so search state is never shared.
using PolicyFactory = std::function<Policy()>;

struct EvalOptions {
  std::uint64_t episodes = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  bool record = false;
  /// Called for each finished episode, possibly from worker threads but never
  /// concurrently.
  std::function<void(std::uint64_t index, const EpisodeResult&)> on_episode;
};

/// Plays `episodes` games. Episode i draws from its own stream seeded by
/// (seed, i), so the report does not depend on the worker count.
EvalReport evaluate(const PolicyFactory& make_policy, const EvalOptions& options);

/// Normal-approximation 95% half-width: 1.96 * sigma / sqrt(n).
double ci95(std::span<const double> samples);

/// Aggregates several evaluations (e.g. of independently trained networks);
/// the score interval is taken over the per-run means.
EvalReport combine_runs(std::span<const EvalReport> runs);

}  // namespace otdl
