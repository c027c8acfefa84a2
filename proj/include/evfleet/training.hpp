#pragma once

#include <functional>
#include <vector>

#include "evfleet/fleet_env.hpp"
#include "evfleet/fqi.hpp"
#include "evfleet/run_config.hpp"

namespace evfleet {

struct DayMetrics {
  int day = 0;
  double epsilon = 1.0;
  double total_reward = 0.0;
  double final_convergence = 0.0;  // last C^k of that day's fit, NaN if k_max == 1
  double pv_utilization = 0.0;     // NaN outside the PV case
  double forced_energy_kwh = 0.0;
};

struct DaySummary {
  double total_reward = 0.0;
  double pv_utilization = 0.0;
  double forced_energy_kwh = 0.0;
  double charged_kwh = 0.0;
};

ProfileProvider make_profile_provider(const RunConfig& cfg, std::uint64_t seed);
FleetEnv make_env(const RunConfig& cfg, std::uint64_t day_seed);

// Runs one day (from minute 0) picking actions at control steps with `choose`;
// appends the per-tick trace and, when `store` is set, the day's transitions.
DaySummary simulate_day(FleetEnv& env,
                        const std::function<int(const FleetState&, ActionRange)>& choose,
                        std::vector<TraceRecord>* trace, BatchStore* store);

double pv_utilization(std::span<const TraceRecord> day_trace);

struct TrainingResult {
  QModel model;
  std::vector<DayMetrics> metrics;
  std::vector<TraceRecord> trace;
  std::vector<std::vector<double>> convergence;  // per day
  BatchStore store;
  FleetEnv env;  // positioned at the start of day `days`
};

using DayCallback = std::function<void(const DayMetrics&)>;

TrainingResult run_training(const RunConfig& cfg, const DayCallback& on_day = {});

// Greedy policy (epsilon = 0) for a model.
std::function<int(const FleetState&, ActionRange)> greedy_policy(const QModel& q);

}  // namespace evfleet
