#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "evfleet/actions.hpp"
#include "evfleet/forest.hpp"

namespace evfleet {

// One control interval: state at step k, the action taken there, reward summed
// over the interval, and the state / feasible set at step k+1.
struct Transition {
  std::vector<double> state;
  ActionRange feasible;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  ActionRange next_feasible;
};

// Q(s, a) over [state features..., action]. Without a forest every query is 0.
class QModel {
 public:
  QModel() = default;
  QModel(Forest forest, std::size_t state_width);

  bool empty() const { return !forest_.has_value(); }
  std::size_t state_width() const { return state_width_; }
  const Forest* forest() const { return forest_ ? &*forest_ : nullptr; }

  double value(std::span<const double> state, int action) const;
  std::vector<double> values(std::span<const double> state, ActionRange range) const;

  struct Best {
    int action = 0;
    double value = 0.0;
  };
  // Greedy action; ties go to the smallest count.
  Best best(std::span<const double> state, ActionRange range) const;

 private:
  std::optional<Forest> forest_;
  std::size_t state_width_ = 0;
};

struct BatchStore {
  std::vector<Transition> daily;   // current day
  std::vector<Transition> global;  // everything seen so far

  void record(Transition t) { daily.push_back(std::move(t)); }
  void commit_day();
};

struct ExplorerConfig {
  double epsilon_floor = 0.05;
  double decay = 2.5;
  int total_days = 75;
};

// max(floor, 1 - decay * day / total_days).
double epsilon(double day, const ExplorerConfig& cfg);

int select_action(const QModel& q, std::span<const double> state,
                  ActionRange feasible, double eps, std::mt19937_64& rng);

// max over next_feasible of q(next_state, a) for every transition.
std::vector<double> best_next_values(std::span<const Transition> batch, const QModel& q);
std::vector<double> best_next_values_serial(std::span<const Transition> batch,
                                            const QModel& q);

// Regression inputs [state..., action] for a batch.
TrainSet batch_inputs(std::span<const Transition> batch);

// X = (s, a), Y = r + gamma * max_a' q_prev(s', a').
TrainSet bellman_targets(std::span<const Transition> batch, const QModel& q_prev,
                         double gamma);

// (q_next - q)^2 / q^2; +inf when q == 0.
double convergence_rate(double q_bar_next, double q_bar);

struct FqiResult {
  QModel model;
  std::vector<double> mean_best;    // q-bar for Q^1..Q^kmax
  std::vector<double> convergence;  // C^k for k = 1..kmax-1
};

FqiResult fqi_fit(std::span<const Transition> batch, int k_max, double gamma,
                  const ForestParams& params, std::uint64_t seed);

}  // namespace evfleet
