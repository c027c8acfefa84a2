#include "evfleet/runner.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "evfleet/errors.hpp"
#include "evfleet/seeding.hpp"

namespace evfleet {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

double window_mean(std::span<const DayMetrics> m, std::size_t lo, std::size_t hi, bool util) {
  hi = std::min(hi, m.size());
  if (lo >= hi) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += util ? m[i].pv_utilization : m[i].total_reward;
  return s / static_cast<double>(hi - lo);
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRecord> rows) {
  auto f = open_out(path);
  f << "day,minute,p_ref_kw,pv_kw,charge_kw,forced_kw,n_min,n_max,reward\n";
  for (const TraceRecord& r : rows)
    f << r.day << ',' << r.minute << ',' << num(r.p_ref_kw) << ',' << num(r.pv_kw) << ','
      << num(r.charge_kw) << ',' << num(r.forced_kw) << ',' << r.n_min << ',' << r.n_max << ','
      << num(r.reward) << '\n';
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const DayMetrics> rows) {
  auto f = open_out(path);
  f << "day,epsilon,total_reward,final_convergence,pv_utilization,forced_energy_kwh\n";
  for (const DayMetrics& m : rows)
    f << m.day << ',' << num(m.epsilon) << ',' << num(m.total_reward) << ','
      << num(m.final_convergence) << ',' << num(m.pv_utilization) << ','
      << num(m.forced_energy_kwh) << '\n';
}

void write_comparison_csv(const std::filesystem::path& path,
                          std::span<const ComparisonRow> rows) {
  auto f = open_out(path);
  f << "day,policy_reward,oracle_reward,policy_utilization,oracle_utilization\n";
  for (const ComparisonRow& r : rows)
    f << r.day << ',' << num(r.policy_reward) << ',' << num(r.oracle_reward) << ','
      << num(r.policy_utilization) << ',' << num(r.oracle_utilization) << '\n';
}

PhaseSummary phase_summary(std::span<const DayMetrics> metrics, bool utilization) {
  PhaseSummary p;
  const std::size_t n = metrics.size();
  p.initial = window_mean(metrics, 0, 5, utilization);
  p.mid = window_mean(metrics, 34, 39, utilization);
  p.final = window_mean(metrics, n >= 5 ? n - 5 : 0, n, utilization);
  return p;
}

std::string summary_text(const RunConfig& cfg, std::span<const DayMetrics> metrics,
                         const ComparisonReport& report) {
  std::ostringstream o;
  const PhaseSummary r = phase_summary(metrics, false);
  o << "case = " << static_cast<int>(cfg.kind) << '\n'
    << "days = " << cfg.days << '\n'
    << "evs = " << cfg.fleet.size << '\n'
    << "seed = " << cfg.seed << '\n'
    << "reward_initial = " << num(r.initial) << '\n'
    << "reward_mid = " << num(r.mid) << '\n'
    << "reward_final = " << num(r.final) << '\n';
  if (cfg.kind == CaseKind::PvCoincident) {
    const PhaseSummary u = phase_summary(metrics, true);
    o << "pv_utilization_initial = " << num(u.initial) << '\n'
      << "pv_utilization_mid = " << num(u.mid) << '\n'
      << "pv_utilization_final = " << num(u.final) << '\n';
  }
  o << "eval_days = " << report.rows.size() << '\n'
    << "eval_policy_reward_mean = " << num(report.policy_reward_mean) << '\n'
    << "eval_oracle_reward_mean = " << num(report.oracle_reward_mean) << '\n';
  if (cfg.kind == CaseKind::PvCoincident)
    o << "eval_policy_pv_utilization = " << num(report.policy_utilization) << '\n'
      << "eval_oracle_pv_utilization = " << num(report.oracle_utilization) << '\n';
  return o.str();
}

void save_model(const std::filesystem::path& path, const RunConfig& cfg, const QModel& q) {
  auto f = open_out(path);
  const std::string text = cfg.to_text();
  const auto lines = std::count(text.begin(), text.end(), '\n');
  f << "evfleet-model 1\nconfig " << lines << '\n' << text;
  if (q.empty()) {
    f << "forest empty\n";
  } else {
    f << "forest present\n";
    q.forest()->save(f);
  }
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read model file " + path.string());
  std::string line;
  std::getline(f, line);
  if (line != "evfleet-model 1") throw ConfigError("not a model file: " + path.string());
  std::string word;
  long lines = 0;
  f >> word >> lines;
  if (word != "config" || lines < 0) throw ConfigError("corrupt model header in " + path.string());
  std::getline(f, line);
  std::string text;
  for (long i = 0; i < lines && std::getline(f, line); ++i) text += line + '\n';
  LoadedModel m;
  m.config = parse_config_text(text);
  std::string state;
  f >> word >> state;
  std::getline(f, line);
  if (word != "forest") throw ConfigError("corrupt model body in " + path.string());
  const std::size_t width = FleetState::width(m.config.kind);
  if (state == "present") {
    Forest forest = Forest::load(f);
    if (forest.width() != width + 1)
      throw ConfigError("model/config feature-layout mismatch: forest expects " +
                        std::to_string(forest.width()) + " inputs, case " +
                        std::to_string(static_cast<int>(m.config.kind)) + " provides " +
                        std::to_string(width + 1));
    m.model = QModel(std::move(forest), width);
  } else if (state != "empty") {
    throw ConfigError("corrupt model body in " + path.string());
  }
  return m;
}

CaseArtifacts run_case(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  auto on_day = [&](const DayMetrics& m) {
    if (!log) return;
    *log << "day " << m.day << " eps " << num(m.epsilon) << " reward " << num(m.total_reward);
    if (cfg.kind == CaseKind::PvCoincident) *log << " pv_util " << num(m.pv_utilization);
    *log << " conv " << num(m.final_convergence) << '\n';
  };
  CaseArtifacts art{run_training(cfg, on_day), {}};
  art.comparison = evaluate_policy_vs_oracle(art.training.model, art.training.env, cfg.eval_days);

  const auto& dir = cfg.out_dir;
  write_trace_csv(dir / "trace.csv", art.training.trace);
  write_metrics_csv(dir / "metrics.csv", art.training.metrics);
  write_comparison_csv(dir / "comparison.csv", art.comparison.rows);
  write_trace_csv(dir / "eval_trace.csv", art.comparison.policy_trace);
  save_model(dir / "model.txt", cfg, art.training.model);
  const std::string summary = summary_text(cfg, art.training.metrics, art.comparison);
  open_out(dir / "summary.txt") << summary;
  if (log) *log << summary;
  return art;
}

std::vector<TraceRecord> replay(const LoadedModel& loaded, std::uint64_t day_seed) {
  const RunConfig& cfg = loaded.config;
  const std::size_t width = FleetState::width(cfg.kind);
  if (!loaded.model.empty() && loaded.model.state_width() != width)
    throw ConfigError("model/config feature-layout mismatch");
  FleetEnv env = make_env(cfg, day_seed);
  const auto policy = greedy_policy(loaded.model);
  simulate_day(env, policy, nullptr, nullptr);
  std::vector<TraceRecord> trace;
  simulate_day(env, policy, &trace, nullptr);
  return trace;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"EV fleet charging with fitted Q-iteration"};
  app.require_subcommand(1);

  std::string config_path, pv_file, out_dir, model_path;
  std::vector<std::string> overrides;
  std::optional<int> case_id, days, evs;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "train, evaluate against the oracle, write artifacts");
  run->add_option("--case", case_id, "0 load following, 1 ramp service, 2 PV coincident");
  run->add_option("--days", days, "training days");
  run->add_option("--evs", evs, "fleet size");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--config", config_path, "key = value file");
  run->add_option("--pv-file", pv_file, "PV csv (minute,kw); implies pv_source = file");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--set", overrides, "key=value override (repeatable)");

  std::uint64_t replay_seed = 1;
  auto* rep = app.add_subcommand("replay", "greedy rollout of one day from a saved model");
  rep->add_option("--model", model_path, "model file written by run")->required();
  rep->add_option("--seed", replay_seed, "day seed");
  rep->add_option("--out", out_dir, "output directory");
  rep->add_option("--set", overrides, "key=value override of the stored config (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto apply_overrides = [&](ConfigBuilder& b) {
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      b.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  };

  try {
    if (*run) {
      ConfigBuilder b;
      if (!config_path.empty()) b.load_file(config_path);
      if (case_id) b.set("case", std::to_string(*case_id));
      if (days) b.set("days", std::to_string(*days));
      if (evs) b.set("evs", std::to_string(*evs));
      if (seed) b.set("seed", std::to_string(*seed));
      if (!pv_file.empty()) {
        b.set("pv_file", pv_file);
        b.set("pv_source", "file");
      }
      if (!out_dir.empty()) b.set("out", out_dir);
      apply_overrides(b);
      const RunConfig cfg = b.build();
      run_case(cfg, &std::cerr);
    } else {
      LoadedModel loaded = load_model(model_path);
      if (!overrides.empty()) {
        ConfigBuilder b;
        b.load_text(loaded.config.to_text(), model_path);
        apply_overrides(b);
        loaded.config = b.build();
      }
      const auto trace = replay(loaded, replay_seed);
      const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(out_dir);
      write_trace_csv(dir / "replay_trace.csv", trace);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace evfleet
