#include "evfleet/evaluation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "evfleet/training.hpp"

namespace evfleet {

namespace {

struct Totals {
  double pv = 0.0;
  double used = 0.0;
  void add(std::span<const TraceRecord> rows) {
    for (const TraceRecord& r : rows) {
      pv += r.pv_kw;
      used += std::min(r.pv_kw, r.charge_kw);
    }
  }
  double ratio() const { return pv > 0 ? used / pv : std::numeric_limits<double>::quiet_NaN(); }
};

double sum_reward(std::span<const TraceRecord> rows) {
  double r = 0.0;
  for (const TraceRecord& t : rows) r += t.reward;
  return r;
}

}  // namespace

std::vector<TraceRecord> replay_counts(FleetEnv& env, const std::vector<int>& counts) {
  if (env.minute() != 0) throw std::invalid_argument("replay_counts must start at minute 0");
  const int slot_len = env.config().control_minutes;
  if (counts.size() != static_cast<std::size_t>(kMinutesPerDay / slot_len))
    throw std::invalid_argument("replay_counts needs one count per control slot");
  std::vector<TraceRecord> out;
  const int day = env.day();
  while (env.day() == day) {
    const int slot = env.minute() / slot_len;
    const int a = env.feasible().clamp(counts[static_cast<std::size_t>(slot)]);
    out.push_back(env.step(a).trace);
  }
  return out;
}

ComparisonReport evaluate_policy_vs_oracle(const QModel& q, FleetEnv env, int days) {
  const auto policy = greedy_policy(q);
  const bool pv_case = env.kind() == CaseKind::PvCoincident;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ComparisonReport rep;
  Totals policy_pv;
  Totals oracle_pv;
  for (int d = 0; d < days; ++d) {
    const OracleInstance instance = build_oracle_instance(env);
    const OracleSolution plan = oracle_schedule(instance);
    FleetEnv oracle_env = env;
    const std::vector<TraceRecord> oracle_trace = replay_counts(oracle_env, plan.counts);

    const std::size_t first = rep.policy_trace.size();
    const int day = env.day();
    simulate_day(env, policy, &rep.policy_trace, nullptr);
    const std::span<const TraceRecord> policy_day(rep.policy_trace.data() + first,
                                                  rep.policy_trace.size() - first);

    ComparisonRow row;
    row.day = day;
    row.policy_reward = sum_reward(policy_day);
    row.oracle_reward = sum_reward(oracle_trace);
    row.policy_utilization = pv_case ? pv_utilization(policy_day) : nan;
    row.oracle_utilization = pv_case ? pv_utilization(oracle_trace) : nan;
    row.oracle_planned_reward = plan.reward;
    row.oracle_planned_utilization = pv_case ? instance.utilization(plan.counts) : nan;
    rep.rows.push_back(row);
    rep.oracle_counts.push_back(plan.counts);
    rep.instances.push_back(instance);
    policy_pv.add(policy_day);
    oracle_pv.add(oracle_trace);
    rep.policy_reward_mean += row.policy_reward / days;
    rep.oracle_reward_mean += row.oracle_reward / days;
  }
  rep.policy_utilization = pv_case ? policy_pv.ratio() : nan;
  rep.oracle_utilization = pv_case ? oracle_pv.ratio() : nan;
  return rep;
}

}  // namespace evfleet
