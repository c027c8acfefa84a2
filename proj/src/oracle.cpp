#include "evfleet/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace evfleet {

namespace {

// Cost of `count` chargers in `slot` (negated reward, so lower is better).
double slot_cost(const OracleInstance& in, int slot, int count) {
  const double power = count * in.power_kw;
  double c = 0.0;
  const auto base = static_cast<std::size_t>(slot * in.steps_per_slot);
  for (int s = 0; s < in.steps_per_slot; ++s) {
    const double target = in.target[base + static_cast<std::size_t>(s)];
    if (in.objective == OracleObjective::Tracking) {
      const double d = target - power;
      c += d * d;
    } else {
      c -= std::min(target, power);
    }
  }
  return c;
}

class Exchange {
 public:
  explicit Exchange(const OracleInstance& in)
      : in_(in),
        k_(static_cast<std::size_t>(in.slots)),
        j_(in.jobs.size()),
        counts_(k_, 0),
        job_units_(j_, 0),
        window_(j_ * k_, 0),
        uses_(j_ * k_, 0) {
    for (std::size_t j = 0; j < j_; ++j)
      for (int s : in.jobs[j].slots) window_[j * k_ + static_cast<std::size_t>(s)] = 1;
  }

  void greedy_fill() {
    std::vector<std::size_t> order(j_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& sa = in_.jobs[a].slots;
      const auto& sb = in_.jobs[b].slots;
      const int da = sa.empty() ? -1 : sa.back();
      const int db = sb.empty() ? -1 : sb.back();
      return da < db;
    });
    for (std::size_t j : order)
      for (int u = 0; u < in_.jobs[j].required; ++u) place(j, best_free_slot(j));
    for (std::size_t j : order) {
      while (job_units_[j] < in_.jobs[j].capacity) {
        const int s = best_free_slot(j);
        if (s < 0 || marginal_add(s) >= -tolerance()) break;
        place(j, s);
      }
    }
  }

  // Applies the best improving unit move until none is left.
  void improve() {
    while (true) {
      Move best;
      for (std::size_t k = 0; k < k_; ++k) add_gain_[k] = marginal_add(static_cast<int>(k));
      const double min_add = *std::min_element(add_gain_.begin(), add_gain_.end());

      search(kSource);
      for (std::size_t k = 0; k < k_; ++k)
        if (reached_[k] && add_gain_[k] < best.delta) best = {add_gain_[k], kSource, static_cast<int>(k), parent_, -1};

      for (std::size_t k = 0; k < k_; ++k) {
        if (counts_[k] == 0) continue;
        const double remove = marginal_remove(static_cast<int>(k));
        if (remove + std::min(min_add, 0.0) >= best.delta) continue;
        search(static_cast<int>(k));
        if (reached_source_ && remove < best.delta)
          best = {remove, static_cast<int>(k), kSource, parent_, source_parent_};
        for (std::size_t to = 0; to < k_; ++to) {
          if (to == k || !reached_[to]) continue;
          const double d = remove + add_gain_[to];
          if (d < best.delta) best = {d, static_cast<int>(k), static_cast<int>(to), parent_, -1};
        }
      }
      if (!(best.delta < -tolerance())) return;
      apply(best);
    }
  }

  OracleSolution solution() const {
    OracleSolution sol;
    sol.counts = counts_;
    sol.assignment.resize(j_);
    for (std::size_t j = 0; j < j_; ++j)
      for (std::size_t k = 0; k < k_; ++k)
        if (uses_[j * k_ + k]) sol.assignment[j].push_back(static_cast<int>(k));
    sol.reward = in_.reward(sol.counts);
    return sol;
  }

 private:
  static constexpr int kSource = -1;

  // Nodes: slots 0..K-1, jobs K..K+J-1, source K+J.
  struct Move {
    double delta = 0.0;
    int from = kSource;
    int to = kSource;
    std::vector<int> parent;
    int exit_job = -1;
  };

  double tolerance() const {
    double scale = 1.0;
    for (double t : in_.target) scale = std::max(scale, std::abs(t));
    return 1e-9 * scale * std::max(scale, in_.power_kw);
  }

  double marginal_add(int s) const {
    const auto k = static_cast<std::size_t>(s);
    return slot_cost(in_, s, counts_[k] + 1) - slot_cost(in_, s, counts_[k]);
  }
  double marginal_remove(int s) const {
    const auto k = static_cast<std::size_t>(s);
    return slot_cost(in_, s, counts_[k] - 1) - slot_cost(in_, s, counts_[k]);
  }

  // Cheapest free slot in the job's window; ties go to the latest slot.
  int best_free_slot(std::size_t j) const {
    int best = -1;
    double best_delta = std::numeric_limits<double>::infinity();
    for (int s : in_.jobs[j].slots) {
      if (uses_[j * k_ + static_cast<std::size_t>(s)]) continue;
      const double d = marginal_add(s);
      if (d <= best_delta) {
        best_delta = d;
        best = s;
      }
    }
    return best;
  }

  void place(std::size_t j, int s) {
    if (s < 0) throw std::logic_error("oracle: no free slot for a required unit");
    uses_[j * k_ + static_cast<std::size_t>(s)] = 1;
    ++counts_[static_cast<std::size_t>(s)];
    ++job_units_[j];
  }

  int node_of_slot(std::size_t k) const { return static_cast<int>(k); }
  int node_of_job(std::size_t j) const { return static_cast<int>(k_ + j); }
  int source_node() const { return static_cast<int>(k_ + j_); }

  // BFS over the residual graph. Slot -> job when the job uses the slot (it
  // gives the unit up), job -> slot when the slot is a free spot in its
  // window, job -> source when it may drop a unit, source -> job when it may
  // take one more. Intermediate slots keep their counts.
  void search(int start_slot) {
    const std::size_t n = k_ + j_ + 1;
    parent_.assign(n, -2);
    reached_.assign(k_, 0);
    reached_source_ = false;
    source_parent_ = -1;
    const int start = start_slot == kSource ? source_node() : node_of_slot(static_cast<std::size_t>(start_slot));
    std::vector<int> queue{start};
    parent_[static_cast<std::size_t>(start)] = -1;
    auto visit = [&](int node, int from) {
      if (parent_[static_cast<std::size_t>(node)] != -2) return;
      parent_[static_cast<std::size_t>(node)] = from;
      queue.push_back(node);
    };
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int u = queue[head];
      if (u < static_cast<int>(k_)) {
        const auto k = static_cast<std::size_t>(u);
        if (u != start) reached_[k] = 1;
        for (std::size_t j = 0; j < j_; ++j)
          if (uses_[j * k_ + k]) visit(node_of_job(j), u);
      } else if (u < source_node()) {
        const auto j = static_cast<std::size_t>(u) - k_;
        for (std::size_t k = 0; k < k_; ++k)
          if (window_[j * k_ + k] && !uses_[j * k_ + k]) visit(node_of_slot(k), u);
        if (start != source_node() && !reached_source_ && job_units_[j] > in_.jobs[j].required) {
          reached_source_ = true;
          source_parent_ = u;
        }
      } else {
        for (std::size_t j = 0; j < j_; ++j)
          if (job_units_[j] < in_.jobs[j].capacity) visit(node_of_job(j), u);
      }
    }
  }

  void apply(const Move& m) {
    std::vector<int> path;
    int node = m.to == kSource ? m.exit_job : node_of_slot(static_cast<std::size_t>(m.to));
    while (node != -1) {
      path.push_back(node);
      node = m.parent[static_cast<std::size_t>(node)];
    }
    std::reverse(path.begin(), path.end());
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const int u = path[i];
      const int v = path[i + 1];
      const bool u_slot = u < static_cast<int>(k_);
      const bool v_slot = v < static_cast<int>(k_);
      if (u_slot && !v_slot) {
        const auto j = static_cast<std::size_t>(v) - k_;
        uses_[j * k_ + static_cast<std::size_t>(u)] = 0;
        --job_units_[j];
      } else if (!u_slot && v_slot && u != source_node()) {
        const auto j = static_cast<std::size_t>(u) - k_;
        uses_[j * k_ + static_cast<std::size_t>(v)] = 1;
        ++job_units_[j];
      }
    }
    if (m.from != kSource) --counts_[static_cast<std::size_t>(m.from)];
    if (m.to != kSource) ++counts_[static_cast<std::size_t>(m.to)];
  }

  const OracleInstance& in_;
  std::size_t k_;
  std::size_t j_;
  std::vector<int> counts_;
  std::vector<int> job_units_;
  std::vector<std::uint8_t> window_;
  std::vector<std::uint8_t> uses_;
  std::vector<double> add_gain_ = std::vector<double>(k_, 0.0);
  std::vector<int> parent_;
  std::vector<std::uint8_t> reached_;
  bool reached_source_ = false;
  int source_parent_ = -1;
};

}  // namespace

void OracleInstance::validate() const {
  if (slots <= 0 || steps_per_slot <= 0) throw std::invalid_argument("oracle: empty horizon");
  if (!(power_kw > 0)) throw std::invalid_argument("oracle: power must be positive");
  if (target.size() != static_cast<std::size_t>(slots * steps_per_slot))
    throw std::invalid_argument("oracle: target length must be slots * steps_per_slot");
  for (const ChargeJob& job : jobs) {
    if (!std::is_sorted(job.slots.begin(), job.slots.end()) ||
        std::adjacent_find(job.slots.begin(), job.slots.end()) != job.slots.end())
      throw std::invalid_argument("oracle: job slots must be strictly ascending");
    if (!job.slots.empty() && (job.slots.front() < 0 || job.slots.back() >= slots))
      throw std::invalid_argument("oracle: job slot outside the horizon");
    if (job.required < 0 || job.capacity < job.required)
      throw std::invalid_argument("oracle: job needs 0 <= required <= capacity");
    if (job.required > static_cast<int>(job.slots.size()))
      throw std::invalid_argument("oracle: infeasible instance (EV " + std::to_string(job.ev) +
                                  " needs more slots than it has)");
    if (job.capacity > static_cast<int>(job.slots.size()))
      throw std::invalid_argument("oracle: job capacity exceeds its window");
  }
}

double OracleInstance::reward(const std::vector<int>& counts) const {
  double r = 0.0;
  for (int k = 0; k < slots; ++k) r -= slot_cost(*this, k, counts[static_cast<std::size_t>(k)]);
  return r;
}

double OracleInstance::utilization(const std::vector<int>& counts) const {
  double pv = 0.0;
  double used = 0.0;
  for (int k = 0; k < slots; ++k) {
    for (int s = 0; s < steps_per_slot; ++s) {
      const double t = target[static_cast<std::size_t>(k * steps_per_slot + s)];
      pv += t;
      used += std::min(t, counts[static_cast<std::size_t>(k)] * power_kw);
    }
  }
  return pv > 0 ? used / pv : std::numeric_limits<double>::quiet_NaN();
}

OracleSolution oracle_schedule(const OracleInstance& instance) {
  instance.validate();
  Exchange ex(instance);
  ex.greedy_fill();
  ex.improve();
  return ex.solution();
}

OracleSolution brute_force(const OracleInstance& instance) {
  instance.validate();
  std::set<int> evs;
  for (const ChargeJob& j : instance.jobs) evs.insert(j.ev);
  if (evs.size() > 3 || instance.slots > 8)
    throw std::invalid_argument("brute force is limited to 3 EVs and 8 slots");

  // Subsets of each job's window with required..capacity members.
  std::vector<std::vector<unsigned>> choices(instance.jobs.size());
  for (std::size_t j = 0; j < instance.jobs.size(); ++j) {
    const ChargeJob& job = instance.jobs[j];
    const unsigned n = static_cast<unsigned>(job.slots.size());
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      const int bits = std::popcount(mask);
      if (bits >= job.required && bits <= job.capacity) choices[j].push_back(mask);
    }
  }
  const auto k = static_cast<std::size_t>(instance.slots);
  const int max_count = static_cast<int>(instance.jobs.size());
  std::vector<std::vector<double>> cost(k, std::vector<double>(static_cast<std::size_t>(max_count) + 1));
  for (std::size_t s = 0; s < k; ++s)
    for (int c = 0; c <= max_count; ++c) cost[s][static_cast<std::size_t>(c)] = slot_cost(instance, static_cast<int>(s), c);

  std::vector<int> counts(k, 0);
  std::vector<unsigned> pick(instance.jobs.size(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<unsigned> best_pick;

  auto apply_mask = [&](std::size_t j, unsigned mask, int sign) {
    const auto& slots = instance.jobs[j].slots;
    for (std::size_t b = 0; b < slots.size(); ++b)
      if (mask & (1u << b)) counts[static_cast<std::size_t>(slots[b])] += sign;
  };
  auto recurse = [&](auto&& self, std::size_t j) -> void {
    if (j == instance.jobs.size()) {
      double c = 0.0;
      for (std::size_t s = 0; s < k; ++s) c += cost[s][static_cast<std::size_t>(counts[s])];
      if (c < best_cost) {
        best_cost = c;
        best_pick = pick;
      }
      return;
    }
    for (unsigned mask : choices[j]) {
      pick[j] = mask;
      apply_mask(j, mask, +1);
      self(self, j + 1);
      apply_mask(j, mask, -1);
    }
  };
  recurse(recurse, 0);

  OracleSolution sol;
  sol.counts.assign(k, 0);
  sol.assignment.resize(instance.jobs.size());
  for (std::size_t j = 0; j < instance.jobs.size(); ++j) {
    const auto& slots = instance.jobs[j].slots;
    for (std::size_t b = 0; b < slots.size(); ++b)
      if (best_pick[j] & (1u << b)) {
        sol.assignment[j].push_back(slots[b]);
        ++sol.counts[static_cast<std::size_t>(slots[b])];
      }
  }
  sol.reward = instance.reward(sol.counts);
  return sol;
}

OracleInstance build_oracle_instance(const FleetEnv& env) {
  if (env.minute() != 0) throw std::invalid_argument("oracle instance must start at minute 0");
  const FleetConfig& cfg = env.config();
  const int slot_len = cfg.control_minutes;
  OracleInstance in;
  in.slots = kMinutesPerDay / slot_len;
  in.steps_per_slot = slot_len / cfg.step_minutes;
  in.power_kw = cfg.ev.max_charge_kw;
  const bool pv = env.kind() == CaseKind::PvCoincident;
  in.objective = pv ? OracleObjective::PvCoincidence : OracleObjective::Tracking;
  in.target = pv ? env.profile().pv_power : env.profile().reference_power;

  auto units = [&](double soc) {
    const int minutes = required_minutes(soc, cfg.ev, cfg.step_minutes);
    return (minutes + slot_len - 1) / slot_len;
  };
  auto full_slots = [&](int from, int to) {
    std::vector<int> s;
    for (int k = 0; k < in.slots; ++k)
      if (k * slot_len >= from && (k + 1) * slot_len <= to) s.push_back(k);
    return s;
  };
  auto add_job = [&](int ev, std::vector<int> slots, int need, int required) {
    const int cap = std::min(need, static_cast<int>(slots.size()));
    if (cap <= 0) return;
    in.jobs.push_back({ev, std::move(slots), std::clamp(required, 0, cap), cap});
  };

  const bool every = cfg.deadline_mode == DeadlineMode::EveryDeparture;
  for (const EvAgent& ev : env.fleet()) {
    const DayRealization& r = ev.today;
    double soc_out = 100.0;
    if (ev.location == Location::HomePlugged) {
      const int need = units(ev.soc);
      add_job(ev.id, full_slots(0, r.home_departure), need, need);
    } else {
      soc_out = ev.soc;
    }
    const int work_need = units(std::max(0.0, soc_out - r.trip_loss_morning));
    add_job(ev.id, full_slots(r.work_arrival, r.work_departure), work_need,
            every ? work_need : 0);
    // Overnight: whatever cannot fit after midnight must happen today.
    const int home_need = units(std::max(0.0, 100.0 - r.trip_loss_evening));
    const int after_midnight = ev.tomorrow.home_departure / slot_len;
    add_job(ev.id, full_slots(r.home_arrival, kMinutesPerDay), home_need,
            home_need - after_midnight);
  }
  return in;
}

}  // namespace evfleet
