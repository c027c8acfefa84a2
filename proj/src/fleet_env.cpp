#include "evfleet/fleet_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "evfleet/errors.hpp"

namespace evfleet {

namespace {

constexpr int kMaxDrawAttempts = 100;
constexpr double kFullEpsilon = 1e-9;

double draw_normal(std::mt19937_64& rng, double mean, double sigma) {
  if (sigma <= 0.0) return mean;
  return std::normal_distribution<double>(mean, sigma)(rng);
}

int round_up(double minutes, int step) {
  return static_cast<int>(std::ceil(minutes / step - kFullEpsilon)) * step;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  return std::mt19937_64(seq);
}

bool is_full(double soc) { return soc >= 100.0 - kFullEpsilon; }

long slack(const EvAgent& ev, long now, const FleetConfig& cfg) {
  return available_minutes(ev, now) - required_minutes(ev.soc, cfg.ev, cfg.step_minutes);
}

}  // namespace

void FleetConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (size < 1) fail("fleet size must be at least 1");
  if (step_minutes <= 0 || kMinutesPerDay % step_minutes != 0)
    fail("delta_s must divide 1440");
  if (control_minutes <= 0 || control_minutes % step_minutes != 0)
    fail("delta_c must be a positive multiple of delta_s");
  if (kMinutesPerDay % control_minutes != 0) fail("delta_c must divide 1440");
  if (sigma_departure < 0 || sigma_arrival < 0 || daily_sigma_departure < 0 ||
      daily_sigma_arrival < 0 || soc_loss_sigma < 0)
    fail("standard deviations must be non-negative");
  if (mean_departure >= mean_arrival)
    fail("mean departure must precede mean arrival");
  if (travel_minutes < 0 || travel_minutes % step_minutes != 0)
    fail("travel time must be a non-negative multiple of delta_s");
  if (soc_loss_min < 0 || soc_loss_max > 100 || soc_loss_min > soc_loss_max)
    fail("trip SOC loss bounds must satisfy 0 <= min <= max <= 100");
  if (!(ev.battery_capacity_kwh > 0) || !(ev.max_charge_kw > 0))
    fail("battery capacity and charge power must be positive");
}

int required_minutes(double soc, const EvSpec& spec, int step_minutes) {
  const double remaining = std::clamp(100.0 - soc, 0.0, 100.0);
  if (remaining <= kFullEpsilon) return 0;
  const double raw = remaining / 100.0 * spec.battery_capacity_kwh / spec.max_charge_kw * 60.0;
  return round_up(raw, step_minutes);
}

std::vector<EvAgent> sample_fleet(const FleetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int step = cfg.step_minutes;
  const int min_gap = 2 * cfg.travel_minutes + full_charge_minutes(cfg.ev, step);
  const int last_tick = kMinutesPerDay - step;

  std::vector<EvAgent> fleet(static_cast<std::size_t>(cfg.size));
  for (int i = 0; i < cfg.size; ++i) {
    auto rng = stream(seed, static_cast<std::uint32_t>(i), 0xf1ee7u);
    EvAgent& ev = fleet[static_cast<std::size_t>(i)];
    ev.id = i;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxDrawAttempts && !ok; ++attempt) {
      ev.mean_departure = round_up(draw_normal(rng, cfg.mean_departure, cfg.sigma_departure), step);
      ev.mean_arrival = round_up(draw_normal(rng, cfg.mean_arrival, cfg.sigma_arrival), step);
      ok = ev.mean_departure >= 0 && ev.mean_arrival <= last_tick &&
           ev.mean_arrival - ev.mean_departure >= min_gap;
    }
    if (!ok) throw ConfigError("could not draw commute means for EV " + std::to_string(i));
    ev.sigma_departure = cfg.daily_sigma_departure;
    ev.sigma_arrival = cfg.daily_sigma_arrival;
  }
  return fleet;
}

std::vector<DayRealization> sample_day(std::span<const EvAgent> fleet,
                                       const FleetConfig& cfg, int day,
                                       std::uint64_t seed,
                                       std::span<const DayRealization> previous) {
  if (fleet.empty()) throw std::invalid_argument("sample_day needs a non-empty fleet");
  if (!previous.empty() && previous.size() != fleet.size())
    throw std::invalid_argument("previous realizations do not match the fleet");
  const int step = cfg.step_minutes;
  const int full = full_charge_minutes(cfg.ev, step);
  const int last_tick = kMinutesPerDay - step;

  std::vector<DayRealization> out(fleet.size());
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const EvAgent& ev = fleet[i];
    auto rng = stream(seed, static_cast<std::uint32_t>(day), static_cast<std::uint32_t>(ev.id));
    auto loss = [&] {
      return std::clamp(draw_normal(rng, cfg.soc_loss_mean, cfg.soc_loss_sigma),
                        cfg.soc_loss_min, cfg.soc_loss_max);
    };
    bool ok = false;
    DayRealization r;
    for (int attempt = 0; attempt < kMaxDrawAttempts && !ok; ++attempt) {
      r.home_departure = round_up(draw_normal(rng, ev.mean_departure, ev.sigma_departure), step);
      r.home_arrival = round_up(draw_normal(rng, ev.mean_arrival, ev.sigma_arrival), step);
      r.work_arrival = r.home_departure + cfg.travel_minutes;
      r.work_departure = r.home_arrival - cfg.travel_minutes;
      r.trip_loss_morning = loss();
      r.trip_loss_evening = loss();
      ok = r.home_departure >= 0 && r.home_arrival <= last_tick &&
           r.work_arrival < r.work_departure && r.work_departure - r.work_arrival >= full;
      if (ok && !previous.empty())
        ok = r.home_departure + kMinutesPerDay - previous[i].home_arrival >= full;
    }
    if (!ok)
      throw InvariantViolation("no feasible trip realization for EV " + std::to_string(ev.id) +
                               " on day " + std::to_string(day));
    out[i] = r;
  }
  return out;
}

bool is_plugged(const EvAgent& ev) { return ev.location != Location::Traveling; }

long available_minutes(const EvAgent& ev, long now) {
  if (!is_plugged(ev)) return 0;
  return ev.unplug_at - now + ev.pooled_minutes;
}

Availability available_and_critical(std::span<const EvAgent> fleet, long now,
                                    const FleetConfig& cfg) {
  Availability out;
  for (const EvAgent& ev : fleet) {
    if (!is_plugged(ev) || is_full(ev.soc)) continue;
    out.available.push_back(ev.id);
    if (slack(ev, now, cfg) <= cfg.control_minutes) out.critical.push_back(ev.id);
  }
  return out;
}

double freedom(const EvAgent& ev, long now, const FleetConfig& cfg) {
  if (!is_plugged(ev)) return 1.0;
  const int t_r = required_minutes(ev.soc, cfg.ev, cfg.step_minutes);
  if (t_r == 0) return 1.0;
  const long t_a = available_minutes(ev, now);
  if (t_a <= 0 || t_a < t_r)
    throw InvariantViolation("EV " + std::to_string(ev.id) + " cannot reach full charge: t_a=" +
                             std::to_string(t_a) + " t_r=" + std::to_string(t_r));
  return static_cast<double>(t_a - t_r) / static_cast<double>(t_a);
}

std::vector<int> priority_order(std::span<const EvAgent> fleet, std::span<const int> ids,
                                long now, const FleetConfig& cfg) {
  std::vector<std::pair<long, int>> keyed;
  keyed.reserve(ids.size());
  for (int id : ids) keyed.emplace_back(slack(fleet[static_cast<std::size_t>(id)], now, cfg), id);
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  out.reserve(keyed.size());
  for (const auto& [s, id] : keyed) out.push_back(id);
  return out;
}

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample");
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> FleetState::features() const {
  std::vector<double> f{static_cast<double>(minute), static_cast<double>(n_min),
                        static_cast<double>(n_max), total_required, fr_ave, fr_2, fr_5, fr_10};
  if (has_pv_features) {
    f.push_back(pv_indicator);
    f.push_back(static_cast<double>(day_type));
  }
  return f;
}

FleetState build_state(std::span<const EvAgent> fleet, long now, const FleetConfig& cfg,
                       std::span<const double> day_pv, int day_type, CaseKind kind) {
  FleetState s;
  s.minute = static_cast<int>(now % kMinutesPerDay);
  const Availability avail = available_and_critical(fleet, now, cfg);
  s.n_min = static_cast<int>(avail.critical.size());
  s.n_max = static_cast<int>(avail.available.size());

  std::vector<double> fr;
  fr.reserve(fleet.size());
  double total = 0.0;
  for (const EvAgent& ev : fleet) {
    total += required_minutes(ev.soc, cfg.ev, cfg.step_minutes);
    fr.push_back(freedom(ev, now, cfg));
  }
  std::sort(fr.begin(), fr.end());
  s.total_required = total;
  s.fr_ave = std::accumulate(fr.begin(), fr.end(), 0.0) / static_cast<double>(fr.size());
  s.fr_2 = percentile(fr, 2.0);
  s.fr_5 = percentile(fr, 5.0);
  s.fr_10 = percentile(fr, 10.0);

  if (kind == CaseKind::PvCoincident) {
    s.has_pv_features = true;
    s.day_type = day_type;
    double sum = 0.0;
    for (int m = s.minute - 60; m <= s.minute; m += cfg.control_minutes) {
      if (m < 0) continue;
      const auto idx = static_cast<std::size_t>(m / cfg.step_minutes);
      if (idx < day_pv.size()) sum += day_pv[idx];
    }
    s.pv_indicator = sum;
  }
  return s;
}

double step_reward(CaseKind kind, double p_ref_kw, double pv_kw, double charge_kw) {
  if (kind == CaseKind::PvCoincident) return std::min(pv_kw, charge_kw);
  const double mismatch = p_ref_kw - charge_kw;
  return -mismatch * mismatch;
}

FleetEnv::FleetEnv(FleetConfig cfg, CaseKind kind, std::vector<EvAgent> fleet,
                   ProfileProvider profiles, std::uint64_t day_seed)
    : cfg_(std::move(cfg)),
      kind_(kind),
      fleet_(std::move(fleet)),
      profiles_(std::move(profiles)),
      day_seed_(day_seed) {
  cfg_.validate();
  if (fleet_.empty()) throw std::invalid_argument("fleet must not be empty");
  for (std::size_t i = 0; i < fleet_.size(); ++i)
    if (fleet_[i].id != static_cast<int>(i))
      throw std::invalid_argument("EV ids must be 0..N-1 in order");

  profile_ = profiles_(0);
  const auto today = sample_day(fleet_, cfg_, 0, day_seed_);
  const auto tomorrow = sample_day(fleet_, cfg_, 1, day_seed_, today);
  for (std::size_t i = 0; i < fleet_.size(); ++i) {
    EvAgent& ev = fleet_[i];
    ev.today = today[i];
    ev.tomorrow = tomorrow[i];
    ev.soc = 100.0;
    ev.location = Location::HomePlugged;
    ev.unplug_at = ev.next_deadline = ev.today.home_departure;
    ev.pooled_minutes = 0;
  }
  process_events();
  refresh_state();
}

void FleetEnv::roll_day() {
  ++day_;
  minute_ = 0;
  std::vector<DayRealization> today(fleet_.size());
  for (std::size_t i = 0; i < fleet_.size(); ++i) {
    fleet_[i].today = fleet_[i].tomorrow;
    today[i] = fleet_[i].today;
  }
  const auto tomorrow = sample_day(fleet_, cfg_, day_ + 1, day_seed_, today);
  for (std::size_t i = 0; i < fleet_.size(); ++i) fleet_[i].tomorrow = tomorrow[i];
  profile_ = profiles_(day_);
}

void FleetEnv::process_events() {
  const long base = static_cast<long>(day_) * kMinutesPerDay;
  const long t = now();
  auto depart = [&](EvAgent& ev, bool deadline) {
    if (deadline) {
      ++departures_;
      if (!is_full(ev.soc))
        throw InvariantViolation("EV " + std::to_string(ev.id) + " departed at minute " +
                                 std::to_string(t) + " with SOC " + std::to_string(ev.soc));
      ++departures_full_;
    }
    ev.location = Location::Traveling;
  };

  for (EvAgent& ev : fleet_) {
    const DayRealization& r = ev.today;
    switch (ev.location) {
      case Location::HomePlugged:
        if (t == base + r.home_departure) depart(ev, true);
        break;
      case Location::WorkPlugged:
        if (t == base + r.work_departure)
          depart(ev, cfg_.deadline_mode == DeadlineMode::EveryDeparture);
        break;
      case Location::Traveling:
        if (t == base + r.work_arrival) {
          ev.soc = std::max(0.0, ev.soc - r.trip_loss_morning);
          ev.location = Location::WorkPlugged;
          ev.unplug_at = base + r.work_departure;
          if (cfg_.deadline_mode == DeadlineMode::EveryDeparture) {
            ev.next_deadline = ev.unplug_at;
            ev.pooled_minutes = 0;
          } else {
            ev.next_deadline = base + kMinutesPerDay + ev.tomorrow.home_departure;
            ev.pooled_minutes = ev.tomorrow.home_departure + kMinutesPerDay - r.home_arrival;
          }
        } else if (t == base + r.home_arrival) {
          ev.soc = std::max(0.0, ev.soc - r.trip_loss_evening);
          ev.location = Location::HomePlugged;
          ev.unplug_at = ev.next_deadline = base + kMinutesPerDay + ev.tomorrow.home_departure;
          ev.pooled_minutes = 0;
        }
        break;
    }
  }
}

void FleetEnv::refresh_state() {
  state_ = build_state(fleet_, now(), cfg_, profile_.pv_power, profile_.day_type, kind_);
}

StepOutcome FleetEnv::step(int action) {
  const long t = now();
  const Availability avail = available_and_critical(fleet_, t, cfg_);
  const int n_min = static_cast<int>(avail.critical.size());
  const int n_max = static_cast<int>(avail.available.size());
  const ActionRange range = feasible_actions(n_min, n_max);
  if (at_control_step() && !range.contains(action))
    throw std::invalid_argument("action " + std::to_string(action) + " outside [" +
                                std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
  const int count = range.clamp(action);

  const std::vector<int> order = priority_order(fleet_, avail.available, t, cfg_);
  const double hours = cfg_.step_minutes / 60.0;
  const double cap = cfg_.ev.battery_capacity_kwh;
  const double max_energy = cfg_.ev.max_charge_kw * hours;
  double energy = 0.0;
  double forced = 0.0;
  for (int i = 0; i < count; ++i) {
    EvAgent& ev = fleet_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    const double delivered = std::min(max_energy, (100.0 - ev.soc) / 100.0 * cap);
    ev.soc += delivered / cap * 100.0;
    if (is_full(ev.soc)) ev.soc = 100.0;
    energy += delivered;
    if (i < n_min) forced += delivered;
  }

  StepOutcome out;
  out.charged_kwh = energy;
  out.forced_kwh = forced;
  TraceRecord& rec = out.trace;
  rec.day = day_;
  rec.minute = minute_;
  rec.p_ref_kw = profile_.reference_at(minute_);
  rec.pv_kw = profile_.pv_at(minute_);
  rec.charge_kw = energy / hours;
  rec.forced_kw = forced / hours;
  rec.n_min = n_min;
  rec.n_max = n_max;
  rec.reward = step_reward(kind_, rec.p_ref_kw, rec.pv_kw, rec.charge_kw);
  out.reward = rec.reward;

  minute_ += cfg_.step_minutes;
  if (minute_ >= kMinutesPerDay) roll_day();
  process_events();
  refresh_state();
  return out;
}

}  // namespace evfleet
