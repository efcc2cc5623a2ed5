#include "otdl/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace otdl {

double EvalReport::rate(std::uint32_t tile) const {
  for (std::size_t i = 0; i < kReportTiles.size(); ++i)
    if (tile_value(kReportTiles[i]) == tile) return reach_rate[i];
  throw std::invalid_argument("tile " + std::to_string(tile) + " is not reported");
}

void EvalReport::write_text(std::ostream& out) const {
  const auto flags = out.flags();
  out << "episodes        " << episodes << '\n';
  out << std::fixed << std::setprecision(1);
  out << "average score   " << avg_score << " +- " << score_ci << '\n';
  out << "max score       " << max_score << '\n';
  out << std::setprecision(2);
  for (std::size_t i = 0; i < kReportTiles.size(); ++i)
    out << std::setw(5) << tile_value(kReportTiles[i]) << " rate      " << 100.0 * reach_rate[i] << "% +- "
        << 100.0 * reach_ci[i] << "%\n";
  out << std::setprecision(0) << "moves/s         " << moves_per_second << '\n';
  out.flags(flags);
}

double ci95(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sigma = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sigma / std::sqrt(static_cast<double>(n));
}

namespace {

double proportion_ci(double p, std::uint64_t n) {
  if (n == 0) return 0.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace

EvalReport evaluate(const PolicyFactory& make_policy, const EvalOptions& options) {
  if (options.workers < 1) throw std::invalid_argument("workers must be at least 1");
  const std::uint64_t n = options.episodes;
  std::vector<double> scores(n);
  std::vector<int> max_exp(n);
  std::vector<std::uint64_t> moves(n);
  std::atomic<std::uint64_t> next{0};
  std::mutex callback;

  const auto start = std::chrono::steady_clock::now();
  auto work = [&] {
    Policy policy = make_policy();
    EpisodeOptions eo;
    eo.record = options.record;
    for (std::uint64_t i; (i = next.fetch_add(1)) < n;) {
      Rng rng(Rng::mix(options.seed) ^ Rng::mix(i + 0x51ed270b27a5f1c3ULL));
      EpisodeResult r = run_episode(policy, nullptr, rng, eo);
      scores[i] = static_cast<double>(r.score);
      max_exp[i] = r.max_exponent;
      moves[i] = r.moves;
      if (options.on_episode) {
        std::lock_guard lock(callback);
        options.on_episode(i, r);
      }
    }
  };
  const int workers = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(options.workers), std::max<std::uint64_t>(n, 1)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  EvalReport report;
  report.episodes = n;
  report.seconds = seconds;
  if (n == 0) return report;
  report.avg_score = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
  report.score_ci = ci95(scores);
  for (double s : scores) report.max_score = std::max(report.max_score, static_cast<std::uint64_t>(s));
  for (std::size_t t = 0; t < kReportTiles.size(); ++t) {
    std::uint64_t hit = 0;
    for (int e : max_exp) hit += e >= kReportTiles[t];
    report.reach_rate[t] = static_cast<double>(hit) / static_cast<double>(n);
    report.reach_ci[t] = proportion_ci(report.reach_rate[t], n);
  }
  report.moves = std::accumulate(moves.begin(), moves.end(), std::uint64_t{0});
  report.moves_per_second = seconds > 0 ? static_cast<double>(report.moves) / seconds : 0.0;
  report.run_means = {report.avg_score};
  return report;
}

EvalReport combine_runs(std::span<const EvalReport> runs) {
  EvalReport out;
  if (runs.empty()) return out;
  std::vector<double> means;
  double score_sum = 0.0;
  std::array<double, 5> hits{};
  for (const auto& r : runs) {
    out.episodes += r.episodes;
    score_sum += r.avg_score * static_cast<double>(r.episodes);
    out.max_score = std::max(out.max_score, r.max_score);
    for (std::size_t t = 0; t < hits.size(); ++t) hits[t] += r.reach_rate[t] * static_cast<double>(r.episodes);
    out.moves += r.moves;
    out.seconds += r.seconds;
    means.push_back(r.avg_score);
  }
  const double n = static_cast<double>(out.episodes);
  out.avg_score = n > 0 ? score_sum / n : 0.0;
  out.score_ci = ci95(means);
  for (std::size_t t = 0; t < hits.size(); ++t) {
    out.reach_rate[t] = n > 0 ? hits[t] / n : 0.0;
    std::vector<double> per_run;
    for (const auto& r : runs) per_run.push_back(r.reach_rate[t]);
    out.reach_ci[t] = ci95(per_run);
  }
  out.moves_per_second = out.seconds > 0 ? static_cast<double>(out.moves) / out.seconds : 0.0;
  out.run_means = std::move(means);
  return out;
}

}  // namespace otdl
