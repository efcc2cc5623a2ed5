#include "cli.hpp"

#include <bit>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "otdl/board.hpp"
#include "otdl/config.hpp"
#include "otdl/evaluation.hpp"
#include "otdl/learning.hpp"
#include "otdl/mcts.hpp"
#include "otdl/network.hpp"
#include "otdl/presets.hpp"
#include "otdl/record.hpp"
#include "otdl/search.hpp"
#include "otdl/serialize.hpp"
#include "otdl/solver.hpp"

namespace otdl::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(sep, start);
    parts.emplace_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

std::string format_number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::optional<int> env_threads() {
  const char* s = std::getenv("OTDL_THREADS");
  if (!s || !*s) return std::nullopt;
  const auto n = parse_integer("OTDL_THREADS", s);
  if (n < 1) throw ConfigError("OTDL_THREADS must be at least 1");
  return static_cast<int>(n);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

// ---------------------------------------------------------------------------
// Learner settings as key = value pairs

Exploration parse_exploration(const std::string& text) {
  Exploration e;
  const auto parts = split(text, ':');
  if (parts[0] == "greedy" && parts.size() == 1) return e;
  if (parts.size() != 2) throw ConfigError("exploration: expected greedy, epsilon:E or softmax:T");
  if (parts[0] == "epsilon") e.kind = Exploration::Kind::EpsilonGreedy;
  else if (parts[0] == "softmax") e.kind = Exploration::Kind::Softmax;
  else throw ConfigError("exploration: unknown kind '" + parts[0] + "'");
  e.initial = parse_number("exploration", parts[1]);
  return e;
}

std::string exploration_string(const Exploration& e) {
  switch (e.kind) {
    case Exploration::Kind::Greedy: return "greedy";
    case Exploration::Kind::EpsilonGreedy: return "epsilon:" + format_number(e.initial);
    case Exploration::Kind::Softmax: return "softmax:" + format_number(e.initial);
  }
  return "greedy";
}

std::vector<LrBreakpoint> parse_schedule(const std::string& text) {
  std::vector<LrBreakpoint> out;
  if (text.empty() || text == "none") return out;
  for (const auto& item : split(text, ',')) {
    const auto kv = split(item, ':');
    if (kv.size() != 2) throw ConfigError("lr_schedule: expected fraction:alpha pairs, got '" + item + "'");
    out.push_back({parse_number("lr_schedule", kv[0]), parse_number("lr_schedule", kv[1])});
  }
  return out;
}

std::string schedule_string(const std::vector<LrBreakpoint>& s) {
  if (s.empty()) return "none";
  std::string out;
  for (const auto& bp : s) {
    if (!out.empty()) out += ',';
    out += format_number(bp.fraction) + ":" + format_number(bp.alpha);
  }
  return out;
}

std::vector<TileMultiset> parse_stages(const std::string& text) {
  std::vector<TileMultiset> out;
  if (text.empty() || text == "none") return out;
  for (const auto& item : split(text, '|')) {
    try {
      out.push_back(TileMultiset::parse(item));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("stages: ") + e.what());
    }
  }
  return out;
}

std::string stages_string(const std::vector<TileMultiset>& s) {
  if (s.empty()) return "none";
  std::string out;
  for (const auto& t : s) {
    if (!out.empty()) out += '|';
    out += t.to_string();
  }
  return out;
}

struct TrainSettings {
  std::string preset = "4x6";
  std::string method = "td";
  LearnerConfig learner;
  std::vector<TileMultiset> stages;  // thresholds of stages 2, 3, ...
  int stage = 1;
  std::string init;
  std::uint64_t harvest_episodes = 1000;
  std::string out_dir = ".";
  std::string name = "run";
  bool snapshots = false;
};

TrainSettings resolve_train(const KeyValueConfig& kv) {
  TrainSettings s;
  try {
    s.preset = kv.string_or("preset", s.preset);
    find_preset(s.preset);
    s.method = kv.string_or("method", s.method);
    LearnerConfig c = method_preset(s.method);
    if (auto a = kv.get("algorithm")) c.algorithm = parse_algorithm(*a);
    c.nstep = static_cast<int>(kv.integer_or("nstep", c.nstep));
    c.lambda = kv.number_or("lambda", c.lambda);
    c.alpha = kv.number_or("alpha", c.alpha);
    c.tc_alpha = kv.number_or("tc_alpha", c.tc_alpha);
    c.v_init = kv.number_or("v_init", c.v_init);
    c.p_tc = kv.number_or("p_tc", c.p_tc);
    if (auto v = kv.get("lr_schedule")) c.lr_schedule = parse_schedule(*v);
    if (auto v = kv.get("exploration")) c.exploration = parse_exploration(*v);
    if (auto v = kv.get("order")) {
      if (*v == "forward") c.order = UpdateOrder::Forward;
      else if (*v == "backward") c.order = UpdateOrder::Backward;
      else throw ConfigError("order: expected forward or backward");
    }
    c.total_episodes = static_cast<std::uint64_t>(kv.integer_or("episodes", static_cast<std::int64_t>(c.total_episodes)));
    c.eval_every = static_cast<std::uint64_t>(kv.integer_or("eval_every", 0));
    c.eval_episodes = static_cast<std::uint64_t>(kv.integer_or("eval_episodes", 0));
    c.coherence_reset_every = static_cast<std::uint64_t>(kv.integer_or("coherence_reset_every", 0));
    c.workers = static_cast<int>(kv.integer_or("workers", 1));
    c.seed = static_cast<std::uint64_t>(kv.integer_or("seed", 1));
    c.initialize = kv.flag_or("initialize", true);
    s.learner = c;
    s.stages = parse_stages(kv.string_or("stages", "none"));
    s.stage = static_cast<int>(kv.integer_or("stage", 1));
    s.init = kv.string_or("init", "");
    s.harvest_episodes = static_cast<std::uint64_t>(kv.integer_or("harvest_episodes", 1000));
    s.out_dir = kv.string_or("out_dir", ".");
    s.name = kv.string_or("name", "run");
    s.snapshots = kv.flag_or("snapshots", false);
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (s.stage < 1 || static_cast<std::size_t>(s.stage) > s.stages.size() + 1)
    throw ConfigError("stage must lie in [1, number of stages]");
  if (s.stage > 1 && s.init.empty()) throw ConfigError("stage > 1 needs init = <network with trained earlier stages>");
  if (s.snapshots && s.learner.coherence_reset_every == 0)
    throw ConfigError("snapshots are taken at coherence resets; set coherence_reset_every");
  return s;
}

KeyValueConfig describe(const TrainSettings& s) {
  const LearnerConfig& c = s.learner;
  KeyValueConfig kv;
  kv.set("preset", s.preset);
  kv.set("method", s.method);
  kv.set("algorithm", to_string(c.algorithm));
  kv.set("nstep", std::to_string(c.nstep));
  kv.set("lambda", format_number(c.lambda));
  kv.set("alpha", format_number(c.alpha));
  kv.set("tc_alpha", format_number(c.tc_alpha));
  kv.set("v_init", format_number(c.v_init));
  kv.set("p_tc", format_number(c.p_tc));
  kv.set("lr_schedule", schedule_string(c.lr_schedule));
  kv.set("exploration", exploration_string(c.exploration));
  kv.set("order", c.order == UpdateOrder::Forward ? "forward" : "backward");
  kv.set("episodes", std::to_string(c.total_episodes));
  kv.set("eval_every", std::to_string(c.eval_every));
  kv.set("eval_episodes", std::to_string(c.eval_episodes));
  kv.set("coherence_reset_every", std::to_string(c.coherence_reset_every));
  kv.set("workers", std::to_string(c.workers));
  kv.set("seed", std::to_string(c.seed));
  kv.set("initialize", c.initialize ? "true" : "false");
  kv.set("stages", stages_string(s.stages));
  kv.set("stage", std::to_string(s.stage));
  kv.set("init", s.init);
  kv.set("harvest_episodes", std::to_string(s.harvest_episodes));
  kv.set("out_dir", s.out_dir);
  kv.set("name", s.name);
  kv.set("snapshots", s.snapshots ? "true" : "false");
  return kv;
}

/// Reads a key = value file, or the "config" object of a JSON manifest.
KeyValueConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    KeyValueConfig kv;
    try {
      const json j = json::parse(text);
      for (const auto& [k, v] : j.at("config").items()) kv.set(k, v.is_string() ? v.get<std::string>() : v.dump());
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    return kv;
  }
  return KeyValueConfig::parse(text, path.string());
}

// ---------------------------------------------------------------------------
// Evaluators

struct EvaluatorOptions {
  std::string kind;  // empty = infer from the other flags
  int depth = 1;
  std::size_t tt_size = std::size_t{1} << 20;
  bool use_tt = true;
  bool rectified = false;
  std::string downgrade;
  int sims = 100;
  double c = 0.005;
  std::string vnorm = "400000";
  std::optional<double> strength_z;
  double strength_rth = 0.0;

  bool search_flags = false;
  bool mcts_flags = false;

  void add(CLI::App* app) {
    app->add_option("--evaluator", kind, "greedy, expectimax or mcts")
        ->check(CLI::IsMember({"greedy", "expectimax", "mcts"}));
    auto mark_search = [this](auto) { search_flags = true; };
    auto mark_mcts = [this](auto) { mcts_flags = true; };
    app->add_option("--depth", depth, "expectimax depth (chance layers)")->each(mark_search);
    app->add_option("--tt-size", tt_size, "transposition table entries (power of two, 0 disables)")->each(mark_search);
    app->add_flag("--rectified", rectified, "rectified expectimax")->each(mark_search);
    app->add_option("--downgrade", downgrade, "tile-downgrading threshold, e.g. 32768,8192")->each(mark_search);
    app->add_option("--mcts-sims", sims, "MCTS simulations per move")->each(mark_mcts);
    app->add_option("--mcts-c", c, "UCB exploration constant")->each(mark_mcts);
    app->add_option("--vnorm", vnorm, "normalization in points, or 'dynamic'")->each(mark_mcts);
    app->add_option("--strength-z", strength_z, "strength index z")->each(mark_mcts);
    app->add_option("--strength-rth", strength_rth, "strength threshold ratio R_th")->each(mark_mcts);
  }

  void resolve() {
    if (kind.empty()) {
      if (search_flags && mcts_flags) throw UsageError("expectimax and MCTS flags given together");
      kind = search_flags ? "expectimax" : mcts_flags ? "mcts" : "greedy";
    }
    if (search_flags && kind != "expectimax") throw UsageError("search flags need --evaluator expectimax");
    if (mcts_flags && kind != "mcts") throw UsageError("MCTS flags need --evaluator mcts");
  }

  SearchConfig search_config() const {
    SearchConfig cfg;
    cfg.depth = depth;
    cfg.use_tt = tt_size > 0;
    cfg.tt_capacity = tt_size > 0 ? tt_size : 1;
    cfg.rectified = rectified;
    if (!downgrade.empty()) cfg.downgrade_threshold = TileMultiset::parse(downgrade);
    cfg.validate();
    return cfg;
  }

  MctsConfig mcts_config() const {
    MctsConfig cfg;
    cfg.simulations = sims;
    cfg.c = c;
    if (vnorm == "dynamic") cfg.dynamic_vnorm = true;
    else cfg.v_norm = parse_number("--vnorm", vnorm);
    cfg.validate();
    return cfg;
  }

  PolicyFactory factory(const AfterstateEvaluator& v) const {
    try {
      if (kind == "expectimax") {
        const SearchConfig cfg = search_config();
        return [&v, cfg] { return expectimax_policy(v, cfg); };
      }
      if (kind == "mcts") {
        const MctsConfig cfg = mcts_config();
        std::optional<std::pair<double, double>> strength;
        if (strength_z) strength = std::pair{*strength_z, strength_rth};
        return [&v, cfg, strength] { return mcts_policy(v, cfg, strength); };
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return [&v] { return greedy_policy(v); };
  }

  json describe() const {
    json j;
    j["kind"] = kind;
    if (kind == "expectimax") {
      j["depth"] = depth;
      j["tt_size"] = tt_size;
      j["rectified"] = rectified;
      j["downgrade"] = downgrade;
    } else if (kind == "mcts") {
      j["simulations"] = sims;
      j["c"] = c;
      j["vnorm"] = vnorm;
      if (strength_z) {
        j["strength_z"] = *strength_z;
        j["strength_rth"] = strength_rth;
      }
    }
    return j;
  }
};

json report_json(const EvalReport& r) {
  json j;
  j["episodes"] = r.episodes;
  j["avg_score"] = r.avg_score;
  j["score_ci95"] = r.score_ci;
  j["max_score"] = r.max_score;
  json rates = json::object();
  for (std::size_t i = 0; i < kReportTiles.size(); ++i)
    rates[std::to_string(tile_value(kReportTiles[i]))] = {{"rate", r.reach_rate[i]}, {"ci95", r.reach_ci[i]}};
  j["reach"] = rates;
  j["moves"] = r.moves;
  j["seconds"] = r.seconds;
  j["moves_per_second"] = r.moves_per_second;
  if (r.run_means.size() > 1) j["run_means"] = r.run_means;
  return j;
}

MultistageNetwork load_or_fail(const std::string& path) {
  try {
    return load_network(path);
  } catch (const NetworkFileException& e) {
    if (e.code() == NetworkFileError::Io) throw IoError(e.what());
    throw ConfigError(path + ": " + e.what());
  }
}

int resolve_workers(int flag_value, bool flag_given) {
  if (flag_given) return flag_value;
  if (auto t = env_threads()) return *t;
  return flag_value;
}

// ---------------------------------------------------------------------------
// Commands

struct TrainArgs {
  std::string config;
  std::map<std::string, std::string> flags;
  bool deterministic = false;
};

int cmd_train(TrainArgs& a, std::ostream& out, std::ostream& err, const std::vector<std::string>& argv) {
  KeyValueConfig kv = a.config.empty() ? KeyValueConfig{} : load_config(a.config);
  for (const auto& [k, v] : a.flags) kv.set(k, v);
  if (!a.flags.count("workers")) {
    if (auto t = env_threads()) kv.set("workers", std::to_string(*t));
  }
  if (a.deterministic) kv.set("workers", "1");
  const TrainSettings s = resolve_train(kv);

  MultistageNetwork msn = [&] {
    if (!s.init.empty()) {
      MultistageNetwork loaded = load_or_fail(s.init);
      if (loaded.stage_count() != s.stages.size() + 1)
        throw ConfigError("init network has " + std::to_string(loaded.stage_count()) + " stages, settings describe " +
                          std::to_string(s.stages.size() + 1));
      return loaded;
    }
    if (s.stages.empty()) return MultistageNetwork(make_preset_network(s.preset));
    std::vector<NTupleNetwork> nets;
    std::vector<TileMultiset> thresholds{TileMultiset{}};
    for (std::size_t k = 0; k <= s.stages.size(); ++k) nets.push_back(make_preset_network(s.preset));
    for (const auto& t : s.stages) thresholds.push_back(t);
    try {
      return MultistageNetwork(std::move(nets), std::move(thresholds));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();

  const fs::path dir = s.out_dir;
  {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  const fs::path net_path = dir / (s.name + ".ntnw");
  const fs::path curve_path = dir / (s.name + ".curve.csv");
  const fs::path manifest_path = dir / (s.name + ".manifest.json");

  TrainHooks hooks;
  hooks.on_eval = [&out](const EvalPoint& p) {
    out << "episodes " << p.episodes << "  avg " << std::fixed << std::setprecision(1) << p.avg_score << "  max "
        << p.max_score << "  2048 " << std::setprecision(3) << p.rates[0] << '\n'
        << std::defaultfloat;
  };
  std::vector<std::string> snapshot_files;
  if (s.snapshots) {
    hooks.on_snapshot = [&](std::uint64_t episode, const NTupleNetwork& net) {
      const fs::path p = dir / (s.name + ".snapshot-" + std::to_string(episode) + ".ntnw");
      try {
        save_network(p, net);
      } catch (const NetworkFileException& e) {
        throw IoError(e.what());
      }
      snapshot_files.push_back(p.string());
    };
  }

  const auto start = std::chrono::steady_clock::now();
  LearningCurve curve;
  std::size_t pool_size = 0;
  try {
    const auto k = static_cast<std::size_t>(s.stage - 1);
    if (k == 0) {
      curve = multistage_train(s.learner, msn, 0, {}, hooks);
    } else {
      Rng rng(Rng::mix(s.learner.seed ^ 0x6861727665737421ULL));
      const std::vector<Board> pool = harvest_stage_starts(msn, s.stages[k - 1], s.harvest_episodes, rng);
      pool_size = pool.size();
      if (pool.empty()) throw ConfigError("no harvested start state reached the stage threshold");
      err << "harvested " << pool.size() << " start states\n";
      curve = multistage_train(s.learner, msn, k, pool, hooks);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  try {
    save_network(net_path, msn);
  } catch (const NetworkFileException& e) {
    throw IoError(e.what());
  }
  {
    std::ofstream f = open_out(curve_path);
    curve.write_csv(f);
  }
  json manifest;
  manifest["tool"] = "otdl";
  manifest["version"] = kVersion;
  manifest["command"] = "train";
  manifest["argv"] = argv;
  manifest["preset_version"] = std::string(kPresetVersion);
  json cfg = json::object();
  const KeyValueConfig resolved = describe(s);
  for (const auto& [k, v] : resolved.values()) cfg[k] = v;
  manifest["config"] = cfg;
  manifest["outputs"] = {{"network", net_path.string()}, {"curve", curve_path.string()}};
  if (!snapshot_files.empty()) manifest["outputs"]["snapshots"] = snapshot_files;
  manifest["result"] = {{"seconds", seconds},
                        {"first_2048", curve.first_2048 ? json(*curve.first_2048) : json(nullptr)},
                        {"evaluations", curve.points.size()}};
  if (s.stage > 1) manifest["result"]["start_pool"] = pool_size;
  {
    std::ofstream f = open_out(manifest_path);
    f << manifest.dump(2) << '\n';
  }
  out << "wrote " << net_path.string() << ", " << curve_path.string() << ", " << manifest_path.string() << '\n';
  return kOk;
}

struct EvaluateArgs {
  std::vector<std::string> networks;
  std::uint64_t episodes = 1000;
  std::uint64_t seed = 1;
  int runs = 1;
  int workers = 1;
  bool workers_given = false;
  std::string json_out;
  std::string record_out;
  EvaluatorOptions ev;
};

int cmd_evaluate(EvaluateArgs& a, std::ostream& out) {
  a.ev.resolve();
  const int workers = resolve_workers(a.workers, a.workers_given);
  std::vector<EvalReport> runs;
  std::ofstream records;
  if (!a.record_out.empty()) records = open_out(a.record_out);
  if (a.runs < 1) throw UsageError("--runs must be at least 1");
  for (const auto& path : a.networks) {
    const MultistageNetwork net = load_or_fail(path);
    for (int run = 0; run < a.runs; ++run) {
      EvalOptions opt;
      opt.episodes = a.episodes;
      opt.seed = a.seed + static_cast<std::uint64_t>(run);
      opt.workers = workers;
      if (!a.record_out.empty()) {
        opt.record = true;
        opt.on_episode = [&records](std::uint64_t, const EpisodeResult& r) {
          records << make_record(r).to_string() << '\n';
        };
      }
      runs.push_back(evaluate(a.ev.factory(net), opt));
    }
  }
  const EvalReport report = runs.size() == 1 ? runs.front() : combine_runs(runs);
  report.write_text(out);
  if (!a.json_out.empty()) {
    json j;
    j["networks"] = a.networks;
    j["evaluator"] = a.ev.describe();
    j["seed"] = a.seed;
    j["report"] = report_json(report);
    std::ofstream f = open_out(a.json_out);
    f << j.dump(2) << '\n';
  }
  return kOk;
}

struct EnsembleArgs {
  std::vector<std::string> snapshots;
  std::uint64_t episodes = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  bool workers_given = false;
  std::string out;
  EvaluatorOptions ev;
};

int cmd_ensemble(EnsembleArgs& a, std::ostream& out) {
  a.ev.resolve();
  const int workers = resolve_workers(a.workers, a.workers_given);
  std::vector<NTupleNetwork> nets;
  for (const auto& p : a.snapshots) {
    MultistageNetwork m = load_or_fail(p);
    if (m.stage_count() != 1) throw ConfigError(p + ": ensembles take single-stage networks");
    nets.push_back(std::move(m.stage(0)));
  }
  for (const auto& n : nets)
    if (!n.same_shape(nets.front())) throw ConfigError("snapshots have different tuple shapes");

  EvalOptions opt;
  opt.episodes = a.episodes;
  opt.seed = a.seed;
  opt.workers = workers;
  std::ostringstream table;
  table << "index,original,original_ci95,ensemble,ensemble_ci95,ensemble_size\n";
  for (std::size_t i = 0; i < nets.size(); ++i) {
    std::vector<const NTupleNetwork*> suffix;
    for (std::size_t j = i; j < nets.size(); ++j) suffix.push_back(&nets[j]);
    const NTupleNetwork avg = swa_average(suffix);
    const EvalReport original = evaluate(a.ev.factory(nets[i]), opt);
    const EvalReport ensemble = evaluate(a.ev.factory(avg), opt);
    table << (i + 1) << ',' << format_number(original.avg_score) << ',' << format_number(original.score_ci) << ','
          << format_number(ensemble.avg_score) << ',' << format_number(ensemble.score_ci) << ',' << suffix.size()
          << '\n';
  }
  if (a.out.empty()) {
    out << table.str();
  } else {
    std::ofstream f = open_out(a.out);
    f << table.str();
  }
  return kOk;
}

struct SweepArgs {
  std::string network;
  std::string sims_list;
  std::string c_list;
  std::string z_list;
  std::string rth_list;
  int sims = 100;
  double c = 0.005;
  std::string vnorm = "400000";
  std::uint64_t episodes = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  bool workers_given = false;
  std::string out;
};

std::vector<double> number_list(const std::string& name, const std::string& text) {
  std::vector<double> v;
  for (const auto& item : split(text, ',')) v.push_back(parse_number(name, item));
  if (v.empty()) throw UsageError(name + " is empty");
  return v;
}

int cmd_sweep(SweepArgs& a, std::ostream& out) {
  const bool nc = !a.sims_list.empty() || !a.c_list.empty();
  const bool zr = !a.z_list.empty() || !a.rth_list.empty();
  if (nc == zr) throw UsageError("give either --sims/--c lists or --z/--rth lists");
  const int workers = resolve_workers(a.workers, a.workers_given);
  const MultistageNetwork net = load_or_fail(a.network);

  MctsConfig base;
  base.simulations = a.sims;
  base.c = a.c;
  if (a.vnorm == "dynamic") base.dynamic_vnorm = true;
  else base.v_norm = parse_number("--vnorm", a.vnorm);

  std::vector<double> rows, cols;
  std::string row_name, col_name;
  if (nc) {
    rows = number_list("--sims", a.sims_list.empty() ? std::to_string(a.sims) : a.sims_list);
    cols = number_list("--c", a.c_list.empty() ? format_number(a.c) : a.c_list);
    row_name = "sims";
    col_name = "c";
  } else {
    rows = number_list("--z", a.z_list.empty() ? "1" : a.z_list);
    cols = number_list("--rth", a.rth_list.empty() ? "0" : a.rth_list);
    row_name = "z";
    col_name = "rth";
  }
  std::ostringstream table;
  table << row_name << ',' << col_name << ",avg_score,score_ci95";
  for (int t : kReportTiles) table << ",rate_" << tile_value(t);
  table << '\n';
  for (double r : rows) {
    for (double col : cols) {
      MctsConfig cfg = base;
      std::optional<std::pair<double, double>> strength;
      if (nc) {
        cfg.simulations = static_cast<int>(r);
        cfg.c = col;
      } else {
        strength = std::pair{r, col};
      }
      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      EvalOptions opt;
      opt.episodes = a.episodes;
      opt.seed = a.seed;  // every cell sees the same games
      opt.workers = workers;
      const EvalReport rep = evaluate([&net, cfg, strength] { return mcts_policy(net, cfg, strength); }, opt);
      table << format_number(r) << ',' << format_number(col) << ',' << format_number(rep.avg_score) << ','
            << format_number(rep.score_ci);
      for (double rate : rep.reach_rate) table << ',' << format_number(rate);
      table << '\n';
    }
  }
  if (a.out.empty()) {
    out << table.str();
  } else {
    std::ofstream f = open_out(a.out);
    f << table.str();
  }
  return kOk;
}

int cmd_solve(int rows, int cols, const std::string& path, std::ostream& out, std::ostream& err) {
  if (!(rows == 2 && cols == 3)) throw ConfigError("the exhaustive solver supports the 2x3 board only");
  const auto start = std::chrono::steady_clock::now();
  SmallGameSolver solver(Geometry::of(rows, cols));
  solver.solve_all();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostream* summary = &out;
  if (path.empty()) {
    solver.write_csv(out);
    summary = &err;
  } else {
    std::ofstream f = open_out(path);
    solver.write_csv(f);
  }
  *summary << "states " << solver.state_count() << "  afterstates " << solver.afterstate_count() << "  seconds "
           << std::fixed << std::setprecision(3) << seconds << std::defaultfloat << '\n';
  return kOk;
}

Board parse_board(const std::string& text) {
  if (text.find(',') != std::string::npos) {
    const auto parts = split(text, ',');
    if (parts.size() != 16) throw ConfigError("a board needs 16 comma separated tile values");
    Board b;
    for (int i = 0; i < 16; ++i) {
      const auto v = parse_integer("board", parts[static_cast<std::size_t>(i)]);
      if (v == 0) continue;
      if (v < 2 || (v & (v - 1)) != 0 || v > 32768) throw ConfigError("bad tile value " + parts[static_cast<std::size_t>(i)]);
      b.set(i, std::countr_zero(static_cast<std::uint64_t>(v)));
    }
    return b;
  }
  if (text.size() != 16) throw ConfigError("a board needs 16 hex digits, got '" + text + "'");
  std::uint64_t raw = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), raw, 16);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw ConfigError("cannot parse board '" + text + "'");
  return Board(raw);
}

int cmd_show(const std::string& board_text, const std::string& network, std::ostream& out) {
  std::optional<MultistageNetwork> net;
  if (!network.empty()) {
    net = load_or_fail(network);
    out << "stages " << net->stage_count() << '\n';
    for (std::size_t k = 0; k < net->stage_count(); ++k) {
      const NTupleNetwork& n = net->stage(k);
      out << "stage " << (k + 1) << "  threshold {" << net->threshold(k).to_string() << "}  tuples "
          << n.tuples().size() << "  weights " << n.weight_count() << "  symmetric " << (n.symmetric() ? "yes" : "no")
          << "  coherence " << (n.has_coherence() ? "yes" : "no") << '\n';
      for (const auto& t : n.tuples()) {
        out << "  (";
        for (std::size_t i = 0; i < t.cells.size(); ++i) out << (i ? "," : "") << t.cells[i];
        out << ")\n";
      }
    }
  }
  if (board_text.empty()) {
    if (!net) throw UsageError("show needs a board or --network");
    return kOk;
  }
  const Board b = parse_board(board_text);
  out << render(b) << '\n';
  for (Action a : kActions) {
    const SlideOutcome o = slide(b, a);
    if (!o.moved) continue;
    out << action_letter(a) << "  reward " << o.reward;
    if (net) out << "  r+V " << format_number(o.reward + net->value(o.afterstate));
    out << '\n';
  }
  if (is_terminal(b)) out << "terminal\n";
  return kOk;
}

int cmd_replay(const std::string& path, std::ostream& out) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (path != "-") {
    file.open(path);
    if (!file) throw IoError("cannot read " + path);
    in = &file;
  }
  std::string line;
  std::size_t index = 0;
  while (std::getline(*in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++index;
    try {
      const ReplayResult r = replay(EpisodeRecord::parse(line));
      out << "record " << index << "  moves " << r.states.size() << "  score " << r.score << "  max tile "
          << tile_value(r.final_state.max_exponent()) << (r.terminal ? "  terminal" : "") << '\n';
      out << render(r.final_state) << '\n';
    } catch (const std::exception& e) {
      throw ConfigError("record " + std::to_string(index) + ": " + e.what());
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"otdl: n-tuple network learning and search for 2048"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // train
  TrainArgs train;
  CLI::App* t = app.add_subcommand("train", "train a network");
  t->add_option("--config", train.config, "key = value file or a JSON manifest to replay");
  t->add_flag("--deterministic", train.deterministic, "single worker, bit-reproducible");
  struct TrainFlag {
    const char* flag;
    const char* key;
    const char* help;
  };
  static const TrainFlag kTrainFlags[] = {
      {"--preset", "preset", "tuple preset (4x6, 5x6, 8x6, yeh-4x6, ...)"},
      {"--method", "method", "td, otd, otc, otd+tc or tc defaults"},
      {"--algorithm", "algorithm", "td0, nstep, lambda, tc, rectified or relu"},
      {"--episodes", "episodes", "training episodes"},
      {"--alpha", "alpha", "TD learning rate"},
      {"--tc-alpha", "tc_alpha", "TC learning rate"},
      {"--v-init", "v_init", "optimistic initial value"},
      {"--p-tc", "p_tc", "fraction of episodes in the TC phase"},
      {"--nstep", "nstep", "n of n-step TD or the lambda horizon"},
      {"--lambda", "lambda", "lambda of TD(lambda)"},
      {"--lr-schedule", "lr_schedule", "fraction:alpha breakpoints, e.g. 0.5:0.01,0.75:0.001"},
      {"--exploration", "exploration", "greedy, epsilon:E or softmax:T"},
      {"--order", "order", "forward or backward"},
      {"--eval-every", "eval_every", "episodes between evaluations"},
      {"--eval-episodes", "eval_episodes", "games per evaluation"},
      {"--reset-every", "coherence_reset_every", "episodes between coherence resets"},
      {"--workers", "workers", "training threads"},
      {"--seed", "seed", "random seed"},
      {"--stages", "stages", "stage thresholds, e.g. 16384|16384,8192"},
      {"--stage", "stage", "stage to train (1-based)"},
      {"--init", "init", "network file to start from"},
      {"--harvest-episodes", "harvest_episodes", "games used to collect stage start states"},
      {"--out-dir", "out_dir", "output directory"},
      {"--name", "name", "output file stem"},
      {"--snapshots", "snapshots", "write a snapshot before each coherence reset (true/false)"},
  };
  CLI::Option* workers_opt = nullptr;
  for (const auto& f : kTrainFlags) {
    const std::string key = f.key;
    CLI::Option* o = t->add_option_function<std::string>(
        f.flag, [&train, key](const std::string& v) { train.flags[key] = v; }, f.help);
    if (key == "workers") workers_opt = o;
  }
  workers_opt->excludes(t->get_option("--deterministic"));

  // evaluate
  EvaluateArgs ev;
  CLI::App* e = app.add_subcommand("evaluate", "evaluate one or more networks");
  e->add_option("networks", ev.networks, "network files; several files aggregate over runs")->required();
  e->add_option("--episodes", ev.episodes, "games per network");
  e->add_option("--seed", ev.seed, "random seed");
  e->add_option("--runs", ev.runs, "independent runs per network (seeds seed, seed+1, ...)");
  e->add_option("--workers", ev.workers, "threads")->each([&ev](auto) { ev.workers_given = true; });
  e->add_option("--json", ev.json_out, "write the report as JSON");
  e->add_option("--record", ev.record_out, "write one episode record per line");
  ev.ev.add(e);

  // ensemble
  EnsembleArgs en;
  CLI::App* s = app.add_subcommand("ensemble", "evaluate averaged snapshot suffixes");
  s->add_option("snapshots", en.snapshots, "snapshot files in training order")->required();
  s->add_option("--episodes", en.episodes, "games per evaluation");
  s->add_option("--seed", en.seed, "random seed");
  s->add_option("--workers", en.workers, "threads")->each([&en](auto) { en.workers_given = true; });
  s->add_option("--out", en.out, "CSV output file (default stdout)");
  en.ev.add(s);

  // sweep
  SweepArgs sw;
  CLI::App* g = app.add_subcommand("sweep", "grid search over MCTS settings");
  g->add_option("network", sw.network, "network file")->required();
  g->add_option("--sims", sw.sims_list, "comma list of simulation counts");
  g->add_option("--c", sw.c_list, "comma list of exploration constants");
  g->add_option("--z", sw.z_list, "comma list of strength indices");
  g->add_option("--rth", sw.rth_list, "comma list of threshold ratios");
  g->add_option("--mcts-sims", sw.sims, "simulations for the z/rth grid");
  g->add_option("--mcts-c", sw.c, "exploration constant for the z/rth grid");
  g->add_option("--vnorm", sw.vnorm, "normalization in points, or 'dynamic'");
  g->add_option("--episodes", sw.episodes, "games per cell");
  g->add_option("--seed", sw.seed, "random seed");
  g->add_option("--workers", sw.workers, "threads")->each([&sw](auto) { sw.workers_given = true; });
  g->add_option("--out", sw.out, "CSV output file (default stdout)");

  // solve
  int rows = 2, cols = 3;
  std::string solve_out;
  CLI::App* so = app.add_subcommand("solve", "solve the 2x3 game exactly");
  so->add_option("--rows", rows, "board rows");
  so->add_option("--cols", cols, "board columns");
  so->add_option("--out", solve_out, "CSV output file (default stdout)");

  // show
  std::string board_text, show_net;
  CLI::App* sh = app.add_subcommand("show", "render a board or describe a network");
  sh->add_option("board", board_text, "16 hex digits (cell 0 lowest) or 16 comma separated tile values");
  sh->add_option("--network", show_net, "network file");

  // replay
  std::string replay_path;
  CLI::App* rp = app.add_subcommand("replay", "check episode records against the engine");
  rp->add_option("records", replay_path, "record file, one episode per line ('-' for stdin)")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    if (!argv.empty()) argv.pop_back();  // program name
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kOk;
    }
    err << "error: " << ex.what() << '\n';
    return kUsage;
  }

  try {
    if (t->parsed()) return cmd_train(train, out, err, args);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (s->parsed()) return cmd_ensemble(en, out);
    if (g->parsed()) return cmd_sweep(sw, out);
    if (so->parsed()) return cmd_solve(rows, cols, solve_out, out, err);
    if (sh->parsed()) return cmd_show(board_text, show_net, out);
    if (rp->parsed()) return cmd_replay(replay_path, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kUsage;
  } catch (const IoError& ex) {
    err << "i/o error: " << ex.what() << '\n';
    return kIo;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& ex) {
    err << "config error: " << ex.what() << '\n';
    return kConfig;
  }
  return kUsage;
}

}  // namespace otdl::cli
