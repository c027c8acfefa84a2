#include "evfleet/training.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "evfleet/errors.hpp"
#include "evfleet/seeding.hpp"

namespace evfleet {

ProfileProvider make_profile_provider(const RunConfig& cfg, std::uint64_t seed) {
  const int step = cfg.fleet.step_minutes;
  std::vector<double> reference =
      cfg.kind == CaseKind::RampService
          ? ramp_reference(cfg.daily_energy_kwh, cfg.ramp_start_min, cfg.ramp_end_min,
                           cfg.ramp_floor_kw, step)
          : flat_reference(cfg.daily_energy_kwh, step);
  const std::size_t steps = reference.size();

  if (cfg.kind != CaseKind::PvCoincident) {
    return [reference = std::move(reference), step, steps](int) {
      DayProfile p;
      p.step_minutes = step;
      p.reference_power = reference;
      p.pv_power.assign(steps, 0.0);
      return p;
    };
  }
  if (cfg.pv_source == PvSource::File) {
    auto curve = std::make_shared<const PvCurve>(load_pv_csv(cfg.pv_file, step));
    const int type = cfg.pv_file_day_type;
    return [reference = std::move(reference), step, curve, type](int) {
      DayProfile p;
      p.step_minutes = step;
      p.reference_power = reference;
      p.pv_power = curve->kw;
      p.day_type = type;
      return p;
    };
  }
  const PvShape shape = cfg.pv;
  const std::array<double, 3> probs = cfg.day_type_probs;
  return [reference = std::move(reference), step, shape, probs, seed](int day) {
    DayProfile p;
    p.step_minutes = step;
    p.reference_power = reference;
    p.day_type = draw_day_type(probs, seed, day);
    p.pv_power = synth_pv(p.day_type, shape, derive_seed(seed, static_cast<std::uint32_t>(day), 1), step);
    return p;
  };
}

FleetEnv make_env(const RunConfig& cfg, std::uint64_t day_seed) {
  cfg.validate();
  auto fleet = sample_fleet(cfg.fleet, derive_seed(cfg.seed, kTagFleet));
  return FleetEnv(cfg.fleet, cfg.kind, std::move(fleet),
                  make_profile_provider(cfg, derive_seed(cfg.seed, kTagProfiles)), day_seed);
}

double pv_utilization(std::span<const TraceRecord> day_trace) {
  double pv = 0.0;
  double used = 0.0;
  for (const TraceRecord& r : day_trace) {
    pv += r.pv_kw;
    used += std::min(r.pv_kw, r.charge_kw);
  }
  return pv > 0 ? used / pv : std::numeric_limits<double>::quiet_NaN();
}

DaySummary simulate_day(FleetEnv& env,
                        const std::function<int(const FleetState&, ActionRange)>& choose,
                        std::vector<TraceRecord>* trace, BatchStore* store) {
  if (env.minute() != 0) throw std::invalid_argument("simulate_day must start at minute 0");
  const int day = env.day();
  const int ticks = env.config().control_minutes / env.config().step_minutes;
  DaySummary sum;
  std::vector<TraceRecord> local;
  local.reserve(static_cast<std::size_t>(kMinutesPerDay / env.config().step_minutes));
  while (env.day() == day) {
    const FleetState s = env.state();
    const ActionRange range = env.feasible();
    const int action = choose(s, range);
    double reward = 0.0;
    for (int i = 0; i < ticks; ++i) {
      const StepOutcome out = env.step(action);
      reward += out.reward;
      sum.charged_kwh += out.charged_kwh;
      sum.forced_energy_kwh += out.forced_kwh;
      local.push_back(out.trace);
    }
    sum.total_reward += reward;
    if (store)
      store->record({s.features(), range, action, reward, env.state().features(), env.feasible()});
  }
  sum.pv_utilization = pv_utilization(local);
  if (trace) trace->insert(trace->end(), local.begin(), local.end());
  return sum;
}

std::function<int(const FleetState&, ActionRange)> greedy_policy(const QModel& q) {
  return [q](const FleetState& s, ActionRange range) {
    if (range.size() == 1) return range.lo;
    return q.best(s.features(), range).action;
  };
}

TrainingResult run_training(const RunConfig& cfg, const DayCallback& on_day) {
  cfg.validate();
  FleetEnv env = make_env(cfg, derive_seed(cfg.seed, kTagDays));
  std::mt19937_64 explore(derive_seed(cfg.seed, kTagExplore));
  const bool pv_case = cfg.kind == CaseKind::PvCoincident;

  QModel q;
  BatchStore store;
  std::vector<DayMetrics> metrics;
  std::vector<TraceRecord> trace;
  std::vector<std::vector<double>> convergence;
  for (int d = 0; d < cfg.days; ++d) {
    const double eps = epsilon(d, cfg.explorer);
    auto choose = [&](const FleetState& s, ActionRange range) {
      return select_action(q, s.features(), range, eps, explore);
    };
    const DaySummary day = simulate_day(env, choose, &trace, &store);
    store.commit_day();
    FqiResult fit = fqi_fit(store.global, cfg.k_max, cfg.gamma, cfg.forest,
                            derive_seed(cfg.seed, kTagForest, static_cast<std::uint32_t>(d)));
    q = std::move(fit.model);

    DayMetrics m;
    m.day = d;
    m.epsilon = eps;
    m.total_reward = day.total_reward;
    m.final_convergence = fit.convergence.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                  : fit.convergence.back();
    m.pv_utilization = pv_case ? day.pv_utilization : std::numeric_limits<double>::quiet_NaN();
    m.forced_energy_kwh = day.forced_energy_kwh;
    metrics.push_back(m);
    convergence.push_back(std::move(fit.convergence));
    if (on_day) on_day(m);
  }
  return TrainingResult{std::move(q), std::move(metrics), std::move(trace),
                        std::move(convergence), std::move(store), std::move(env)};
}

}  // namespace evfleet
