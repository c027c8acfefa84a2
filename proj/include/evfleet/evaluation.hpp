#pragma once

#include <vector>

#include "evfleet/fleet_env.hpp"
#include "evfleet/fqi.hpp"
#include "evfleet/oracle.hpp"

namespace evfleet {

struct ComparisonRow {
  int day = 0;
  double policy_reward = 0.0;
  double oracle_reward = 0.0;
  double policy_utilization = 0.0;  // NaN outside the PV case
  double oracle_utilization = 0.0;
  // The oracle's own objective on its slot model, before the plan is replayed
  // through the simulator (partial final units make the replay differ).
  double oracle_planned_reward = 0.0;
  double oracle_planned_utilization = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::vector<TraceRecord> policy_trace;
  std::vector<std::vector<int>> oracle_counts;
  std::vector<OracleInstance> instances;  // one per day, as solved
  double policy_reward_mean = 0.0;
  double oracle_reward_mean = 0.0;
  double policy_utilization = 0.0;  // aggregate over all days
  double oracle_utilization = 0.0;
};

// Continues `env` (which must sit at minute 0) for `days` greedy days. Each day
// is also solved by the clairvoyant oracle from the same starting snapshot; the
// oracle's plan is replayed through a copy of the environment to confirm it
// never breaks a deadline.
ComparisonReport evaluate_policy_vs_oracle(const QModel& q, FleetEnv env, int days);

// Drives `env` through one day with fixed per-slot counts (clamped into the
// feasible range at each tick).
std::vector<TraceRecord> replay_counts(FleetEnv& env, const std::vector<int>& counts);

}  // namespace evfleet
