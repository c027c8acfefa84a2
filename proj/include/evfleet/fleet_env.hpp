#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evfleet/actions.hpp"
#include "evfleet/profiles.hpp"

namespace evfleet {

enum class CaseKind { LoadFollowing = 0, RampService = 1, PvCoincident = 2 };

// Which departures carry a hard full-charge deadline.
//  EveryDeparture: leaving home and leaving work.
//  HomeDepartureOnly: only the morning departure; the workplace stay and the
//  following overnight window are pooled into one availability budget.
enum class DeadlineMode { EveryDeparture, HomeDepartureOnly };

enum class Location { HomePlugged, WorkPlugged, Traveling };

struct EvSpec {
  // 16.67 kWh nominal; 50/3 makes a full charge exactly 200 minutes at 5 kW.
  double battery_capacity_kwh = 50.0 / 3.0;
  double max_charge_kw = 5.0;
};

struct FleetConfig {
  int size = 100;
  int step_minutes = 10;     // simulation tick
  int control_minutes = 20;  // decision cadence
  double mean_departure = 480.0;
  double sigma_departure = 60.0;
  double mean_arrival = 1080.0;
  double sigma_arrival = 60.0;
  double daily_sigma_departure = 20.0;
  double daily_sigma_arrival = 20.0;
  int travel_minutes = 30;
  double soc_loss_mean = 22.5;
  double soc_loss_sigma = 5.0;
  double soc_loss_min = 5.0;
  double soc_loss_max = 40.0;
  EvSpec ev;
  DeadlineMode deadline_mode = DeadlineMode::EveryDeparture;

  void validate() const;  // throws ConfigError
};

// Times are minutes of the day the realization belongs to.
struct DayRealization {
  int home_departure = 0;
  int work_arrival = 0;
  int work_departure = 0;
  int home_arrival = 0;
  double trip_loss_morning = 0.0;  // percent SOC
  double trip_loss_evening = 0.0;
};

struct EvAgent {
  int id = 0;
  double mean_departure = 0.0;  // per-EV means, minute of day
  double mean_arrival = 0.0;
  double sigma_departure = 0.0;
  double sigma_arrival = 0.0;

  double soc = 100.0;
  Location location = Location::HomePlugged;
  // Absolute minute the EV unplugs; `next_deadline` is the departure by which
  // it must be full. They coincide except at work under HomeDepartureOnly.
  long unplug_at = 0;
  long next_deadline = 0;
  int pooled_minutes = 0;  // extra availability counted after `unplug_at`
  DayRealization today;
  DayRealization tomorrow;
};

// Charging time to full, rounded up to the simulation tick.
int required_minutes(double soc, const EvSpec& spec, int step_minutes);
inline int full_charge_minutes(const EvSpec& spec, int step_minutes) {
  return required_minutes(0.0, spec, step_minutes);
}

std::vector<EvAgent> sample_fleet(const FleetConfig& cfg, std::uint64_t seed);

// Draws one day of trips per EV. `previous` (if non-empty) is the prior day's
// realization and is used to guarantee the overnight window. Throws
// InvariantViolation when no feasible draw is found in 100 attempts.
std::vector<DayRealization> sample_day(std::span<const EvAgent> fleet,
                                       const FleetConfig& cfg, int day,
                                       std::uint64_t seed,
                                       std::span<const DayRealization> previous = {});

bool is_plugged(const EvAgent& ev);

// Minutes of charging availability left at absolute minute `now` (t^a).
long available_minutes(const EvAgent& ev, long now);

struct Availability {
  std::vector<int> available;  // V: plugged and below 100 %
  std::vector<int> critical;   // U: slack <= control_minutes
};

Availability available_and_critical(std::span<const EvAgent> fleet, long now,
                                    const FleetConfig& cfg);

// Slack ratio (t^a - t^r) / t^a; 1 for EVs that need nothing or are driving.
double freedom(const EvAgent& ev, long now, const FleetConfig& cfg);

// Ids from `ids` sorted by ascending slack, ties by ascending id.
std::vector<int> priority_order(std::span<const EvAgent> fleet,
                                std::span<const int> ids, long now,
                                const FleetConfig& cfg);

// Linear-interpolation percentile of an ascending-sorted sample, p in [0,100].
double percentile(std::span<const double> sorted, double p);

struct FleetState {
  int minute = 0;
  int n_min = 0;
  int n_max = 0;
  double total_required = 0.0;  // T_t, minutes
  double fr_ave = 1.0;
  double fr_2 = 1.0;
  double fr_5 = 1.0;
  double fr_10 = 1.0;
  bool has_pv_features = false;
  double pv_indicator = 0.0;  // sum of PV over the past hour at control spacing
  int day_type = 0;

  std::vector<double> features() const;
  static std::size_t width(CaseKind kind) {
    return kind == CaseKind::PvCoincident ? 10 : 8;
  }
};

// `day_pv` is today's PV curve at `cfg.step_minutes`; samples before the start
// of the day count as zero.
FleetState build_state(std::span<const EvAgent> fleet, long now,
                       const FleetConfig& cfg, std::span<const double> day_pv,
                       int day_type, CaseKind kind);

struct TraceRecord {
  int day = 0;
  int minute = 0;
  double p_ref_kw = 0.0;
  double pv_kw = 0.0;
  double charge_kw = 0.0;
  double forced_kw = 0.0;
  int n_min = 0;
  int n_max = 0;
  double reward = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct StepOutcome {
  double reward = 0.0;
  TraceRecord trace;
  double charged_kwh = 0.0;
  double forced_kwh = 0.0;
};

using ProfileProvider = std::function<DayProfile(int day)>;

// Sequential fleet simulator. The observable state at (day, minute) already
// reflects every departure/arrival scheduled for that minute.
class FleetEnv {
 public:
  FleetEnv(FleetConfig cfg, CaseKind kind, std::vector<EvAgent> fleet,
           ProfileProvider profiles, std::uint64_t day_seed);

  const FleetState& state() const { return state_; }
  ActionRange feasible() const { return feasible_actions(state_.n_min, state_.n_max); }
  bool at_control_step() const { return minute_ % cfg_.control_minutes == 0; }

  // Charges for one tick and advances the clock. At control steps `action`
  // must be feasible; elsewhere it is clamped into the current range.
  StepOutcome step(int action);

  int day() const { return day_; }
  int minute() const { return minute_; }
  long now() const { return static_cast<long>(day_) * kMinutesPerDay + minute_; }
  CaseKind kind() const { return kind_; }
  const FleetConfig& config() const { return cfg_; }
  const std::vector<EvAgent>& fleet() const { return fleet_; }
  const DayProfile& profile() const { return profile_; }

  long departures() const { return departures_; }
  long departures_full() const { return departures_full_; }

 private:
  void process_events();
  void refresh_state();
  void roll_day();

  FleetConfig cfg_;
  CaseKind kind_;
  std::vector<EvAgent> fleet_;
  ProfileProvider profiles_;
  std::uint64_t day_seed_;
  DayProfile profile_;
  int day_ = 0;
  int minute_ = 0;
  FleetState state_;
  long departures_ = 0;
  long departures_full_ = 0;
};

double step_reward(CaseKind kind, double p_ref_kw, double pv_kw, double charge_kw);

}  // namespace evfleet
