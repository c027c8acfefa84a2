#pragma once

#include <vector>

#include "evfleet/fleet_env.hpp"

namespace evfleet {

enum class OracleObjective { Tracking, PvCoincidence };

// One plug-in period of one EV: it may charge one unit (one full control slot
// at max power) in any slot of `slots`, at least `required` and at most
// `capacity` units in total.
struct ChargeJob {
  int ev = 0;
  std::vector<int> slots;  // ascending
  int required = 0;
  int capacity = 0;
};

struct OracleInstance {
  int slots = 0;
  int steps_per_slot = 1;
  double power_kw = 5.0;
  OracleObjective objective = OracleObjective::Tracking;
  // Reference (Tracking) or PV (PvCoincidence) kW for every simulation step,
  // slots * steps_per_slot entries.
  std::vector<double> target;
  std::vector<ChargeJob> jobs;

  // Throws std::invalid_argument when the instance is malformed or a job needs
  // more units than it has slots.
  void validate() const;
  // Reward of per-slot charge counts in simulation units (sum over steps).
  double reward(const std::vector<int>& counts) const;
  // PV utilization sum min(pv, P) / sum pv; NaN without PV.
  double utilization(const std::vector<int>& counts) const;
};

struct OracleSolution {
  std::vector<int> counts;                    // per slot
  std::vector<std::vector<int>> assignment;   // per job: slots used
  double reward = 0.0;
};

// Clairvoyant schedule: latest-slot-first greedy fill in deadline order, then
// unit shifts along alternating job/slot paths until no improving move is
// left. The per-slot cost is convex in the count, so the fixed point is a
// global optimum of the instance.
OracleSolution oracle_schedule(const OracleInstance& instance);

// Exhaustive search over every job's slot subsets. At most 3 EVs and 8 slots.
OracleSolution brute_force(const OracleInstance& instance);

// Instance for the day that `env` is about to simulate (env must sit at
// minute 0). Assumes every EV leaves home full, as the deadline rule forces.
OracleInstance build_oracle_instance(const FleetEnv& env);

}  // namespace evfleet
