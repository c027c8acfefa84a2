#include "evfleet/fqi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evfleet {

QModel::QModel(Forest forest, std::size_t state_width)
    : forest_(std::move(forest)), state_width_(state_width) {
  if (forest_->width() != state_width + 1)
    throw std::invalid_argument("forest width must be state width + 1 (action column)");
}

double QModel::value(std::span<const double> state, int action) const {
  if (!forest_) return 0.0;
  std::vector<double> row(state.begin(), state.end());
  row.push_back(static_cast<double>(action));
  return forest_->predict(row);
}

std::vector<double> QModel::values(std::span<const double> state, ActionRange range) const {
  if (!forest_) return std::vector<double>(static_cast<std::size_t>(range.size()), 0.0);
  if (state.size() != state_width_)
    throw std::invalid_argument("state width does not match the model");
  std::vector<double> row(state.begin(), state.end());
  row.push_back(static_cast<double>(range.lo));
  return forest_->predict_range(row, state_width_, range.lo, range.hi);
}

QModel::Best QModel::best(std::span<const double> state, ActionRange range) const {
  const std::vector<double> v = values(state, range);
  Best b{range.lo, v.front()};
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > b.value) b = {range.lo + static_cast<int>(i), v[i]};
  return b;
}

void BatchStore::commit_day() {
  global.insert(global.end(), std::make_move_iterator(daily.begin()),
                std::make_move_iterator(daily.end()));
  daily.clear();
}

double epsilon(double day, const ExplorerConfig& cfg) {
  const double progress = cfg.total_days > 0 ? day / cfg.total_days : 1.0;
  return std::clamp(std::max(cfg.epsilon_floor, 1.0 - cfg.decay * progress), cfg.epsilon_floor, 1.0);
}

int select_action(const QModel& q, std::span<const double> state, ActionRange feasible,
                  double eps, std::mt19937_64& rng) {
  if (feasible.size() == 1) return feasible.lo;
  const double rho = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (eps > rho) return std::uniform_int_distribution<int>(feasible.lo, feasible.hi)(rng);
  return q.best(state, feasible).action;
}

std::vector<double> best_next_values(std::span<const Transition> batch, const QModel& q) {
  std::vector<double> out(batch.size(), 0.0);
  if (q.empty()) return out;
  const auto n = static_cast<long>(batch.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const Transition& t = batch[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = q.best(t.next_state, t.next_feasible).value;
  }
  return out;
}

std::vector<double> best_next_values_serial(std::span<const Transition> batch, const QModel& q) {
  std::vector<double> out(batch.size(), 0.0);
  if (q.empty()) return out;
  for (std::size_t i = 0; i < batch.size(); ++i)
    out[i] = q.best(batch[i].next_state, batch[i].next_feasible).value;
  return out;
}

TrainSet batch_inputs(std::span<const Transition> batch) {
  if (batch.empty()) return TrainSet();
  TrainSet set(batch.front().state.size() + 1);
  set.reserve(batch.size());
  std::vector<double> row;
  for (const Transition& t : batch) {
    row.assign(t.state.begin(), t.state.end());
    row.push_back(static_cast<double>(t.action));
    set.add(row, t.reward);
  }
  return set;
}

TrainSet bellman_targets(std::span<const Transition> batch, const QModel& q_prev, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  TrainSet set = batch_inputs(batch);
  if (q_prev.empty() || gamma == 0.0) return set;
  const std::vector<double> next = best_next_values(batch, q_prev);
  for (std::size_t i = 0; i < batch.size(); ++i) set.targets()[i] = batch[i].reward + gamma * next[i];
  return set;
}

double convergence_rate(double q_bar_next, double q_bar) {
  if (q_bar == 0.0) return std::numeric_limits<double>::infinity();
  const double d = q_bar_next - q_bar;
  return d * d / (q_bar * q_bar);
}

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

FqiResult fqi_fit(std::span<const Transition> batch, int k_max, double gamma,
                  const ForestParams& params, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("fqi_fit needs at least one transition");
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  for (const Transition& t : batch)
    if (!t.feasible.contains(t.action))
      throw std::invalid_argument("transition action outside its feasible set");

  const std::size_t width = batch.front().state.size();
  TrainSet set = batch_inputs(batch);
  FqiResult result;
  QModel q;
  for (int k = 1; k <= k_max; ++k) {
    if (!q.empty()) {
      const std::vector<double> next = best_next_values(batch, q);
      result.mean_best.push_back(mean(next));
      for (std::size_t i = 0; i < batch.size(); ++i)
        set.targets()[i] = batch[i].reward + gamma * next[i];
    }
    q = QModel(Forest::fit(set, params, seed), width);
  }
  if (k_max >= 2) result.mean_best.push_back(mean(best_next_values(batch, q)));
  for (std::size_t k = 0; k + 1 < result.mean_best.size(); ++k)
    result.convergence.push_back(convergence_rate(result.mean_best[k + 1], result.mean_best[k]));
  result.model = std::move(q);
  return result;
}

}  // namespace evfleet
