#include "evfleet/forest.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace evfleet {

void TrainSet::add(std::span<const double> row, double target) {
  if (row.size() != width_) throw std::invalid_argument("row width does not match the train set");
  inputs_.insert(inputs_.end(), row.begin(), row.end());
  targets_.push_back(target);
}

void TrainSet::reserve(std::size_t rows) {
  inputs_.reserve(rows * width_);
  targets_.reserve(rows);
}

void TrainSet::validate() const {
  if (rows() == 0 || width_ == 0) throw std::invalid_argument("empty training set");
  for (double v : inputs_)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite input value");
  for (double v : targets_)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite target value");
}

int ForestParams::split_features(std::size_t width) const {
  const int p = static_cast<int>(width);
  if (features_per_split <= 0) return std::max(1, (p + 2) / 3);
  return std::min(features_per_split, p);
}

namespace {

using Order = std::vector<std::uint32_t>;

// Per-feature sorted sample, with the value, target and weight kept inline so
// scans and partitions stream through memory.
struct Entry {
  double x;
  double y;
  double w;
  std::uint32_t row;
};
using Column = std::vector<Entry>;

struct TreeBuilder {
  const TrainSet& data;
  const std::vector<Order>& presorted;
  const ForestParams& params;
  std::mt19937_64 rng;

  std::vector<std::uint32_t> weight;
  std::vector<Column> order;  // per feature, entries of the current sample
  std::vector<std::uint8_t> goes_left;
  Column scratch;
  std::vector<TreeNode> nodes;

  struct Work {
    std::int32_t node;
    std::size_t begin;
    std::size_t end;
    int depth;
  };

  RegressionTree build() {
    const std::size_t n = data.rows();
    const std::size_t p = data.width();
    weight.assign(n, params.bootstrap ? 0u : 1u);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) ++weight[pick(rng)];
    }
    order.assign(p, {});
    for (std::size_t f = 0; f < p; ++f) {
      order[f].reserve(n);
      for (std::uint32_t r : presorted[f])
        if (weight[r] > 0) order[f].push_back({data.input(r, f), data.targets()[r], double(weight[r]), r});
    }
    goes_left.assign(n, 0);
    scratch.resize(order[0].size());

    nodes.emplace_back();
    std::vector<Work> stack{{0, 0, order[0].size(), 0}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      split(w, stack);
    }
    return RegressionTree(std::move(nodes));
  }

  bool can_split(double total_w, int depth) const {
    return !(params.max_depth > 0 && depth >= params.max_depth) &&
           total_w >= 2.0 * params.min_samples_leaf;
  }

  // Stable in-place partition of one column's node range; returns the left size.
  std::size_t partition(Column& o, std::size_t begin, std::size_t end) {
    std::size_t a = begin;
    std::size_t b = 0;
    for (std::size_t i = begin; i < end; ++i) {
      if (goes_left[o[i].row]) o[a++] = o[i];
      else scratch[b++] = o[i];
    }
    std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(b),
              o.begin() + static_cast<std::ptrdiff_t>(a));
    return a - begin;
  }

  void split(const Work& w, std::vector<Work>& stack) {
    const Column& rows = order[0];
    double total_w = 0.0;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = w.begin; i < w.end; ++i) {
      const Entry& e = rows[i];
      total_w += e.w;
      sum += e.w * e.y;
      lo = std::min(lo, e.y);
      hi = std::max(hi, e.y);
    }
    const double mean = sum / total_w;
    nodes[static_cast<std::size_t>(w.node)].value = mean;

    const double min_leaf = params.min_samples_leaf;
    if (!can_split(total_w, w.depth) || lo == hi) return;

    // Centre the targets so the score terms stay well conditioned.
    double centred_sum = 0.0;
    double sse = 0.0;
    for (std::size_t i = w.begin; i < w.end; ++i) {
      const Entry& e = rows[i];
      const double c = e.y - mean;
      centred_sum += e.w * c;
      sse += e.w * c * c;
    }

    const std::size_t p = data.width();
    std::vector<std::size_t> features(p);
    std::iota(features.begin(), features.end(), 0);
    const auto k = static_cast<std::size_t>(params.split_features(p));
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, p - 1);
      std::swap(features[i], features[pick(rng)]);
    }
    features.resize(k);
    std::sort(features.begin(), features.end());

    // Maximising sl^2/wl + sr^2/wr minimises the children's summed squared error.
    double best_score = -std::numeric_limits<double>::infinity();
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    double best_wl = 0.0;
    for (std::size_t f : features) {
      const Column& sorted = order[f];
      double wl = 0.0;
      double sl = 0.0;
      for (std::size_t i = w.begin; i + 1 < w.end; ++i) {
        const Entry& e = sorted[i];
        wl += e.w;
        sl += e.w * (e.y - mean);
        const double x = e.x;
        const double x_next = sorted[i + 1].x;
        if (!(x_next > x)) continue;
        const double wr = total_w - wl;
        if (wl < min_leaf || wr < min_leaf) continue;
        const double sr = centred_sum - sl;
        const double score = sl * sl / wl + sr * sr / wr;
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<std::int32_t>(f);
          best_wl = wl;
          double mid = x + (x_next - x) / 2.0;
          if (!(mid > x)) mid = x_next;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return;
    const double gain = best_score - centred_sum * centred_sum / total_w;
    if (!(gain > 1e-12 * sse)) return;

    const auto bf = static_cast<std::size_t>(best_feature);
    for (std::size_t i = w.begin; i < w.end; ++i) {
      const Entry& e = order[bf][i];
      goes_left[e.row] = e.x < best_threshold ? 1 : 0;
    }
    // Leaf children only need one column in node order.
    const bool grow = can_split(best_wl, w.depth + 1) || can_split(total_w - best_wl, w.depth + 1);
    std::size_t left_count = 0;
    for (std::size_t f = 0; f < (grow ? p : 1); ++f) left_count = partition(order[f], w.begin, w.end);

    const auto left = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    const auto right = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    TreeNode& node = nodes[static_cast<std::size_t>(w.node)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left;
    node.right = right;
    const std::size_t mid = w.begin + left_count;
    stack.push_back({right, mid, w.end, w.depth + 1});
    stack.push_back({left, w.begin, mid, w.depth + 1});
  }
};

std::mt19937_64 tree_rng(std::uint64_t seed, std::size_t tree) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tree), 0x7ee5u};
  return std::mt19937_64(seq);
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error(std::string("forest file truncated at ") + what);
  T value{};
  auto r = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
    throw std::runtime_error(std::string("forest file: bad ") + what + " '" + tok + "'");
  return value;
}

void expect_word(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word)
    throw std::runtime_error("forest file: expected '" + word + "', got '" + tok + "'");
}

}  // namespace

double RegressionTree::predict(std::span<const double> row) const {
  std::int32_t i = 0;
  while (true) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
    if (n.feature < 0) return n.value;
    i = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
}

void RegressionTree::accumulate_range(std::span<const double> row, std::size_t feature,
                                      int lo, int hi, std::span<double> out) const {
  if (lo > hi) return;
  accumulate_node(0, row, feature, lo, hi, lo, out);
}

void RegressionTree::accumulate_node(std::int32_t index, std::span<const double> row,
                                     std::size_t feature, int lo, int hi, int base,
                                     std::span<double> out) const {
  const TreeNode& n = nodes_[static_cast<std::size_t>(index)];
  if (n.feature < 0) {
    for (int a = lo; a <= hi; ++a) out[static_cast<std::size_t>(a - base)] += n.value;
    return;
  }
  if (static_cast<std::size_t>(n.feature) != feature) {
    const std::int32_t next = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    accumulate_node(next, row, feature, lo, hi, base, out);
    return;
  }
  // Largest integer strictly below the threshold goes left.
  const double cut_d = std::ceil(n.threshold) - 1.0;
  const int cut = cut_d < lo ? lo - 1 : (cut_d > hi ? hi : static_cast<int>(cut_d));
  if (cut >= lo) accumulate_node(n.left, row, feature, lo, cut, base, out);
  if (cut + 1 <= hi) accumulate_node(n.right, row, feature, cut + 1, hi, base, out);
}

std::size_t RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
    if (n.feature >= 0) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

Forest Forest::fit(const TrainSet& data, const ForestParams& params, std::uint64_t seed) {
  return fit_impl(data, params, seed, true);
}

Forest Forest::fit_serial(const TrainSet& data, const ForestParams& params, std::uint64_t seed) {
  return fit_impl(data, params, seed, false);
}

Forest Forest::fit_impl(const TrainSet& data, const ForestParams& params, std::uint64_t seed,
                        bool parallel) {
  data.validate();
  if (params.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  if (params.min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
  if (data.rows() < static_cast<std::size_t>(params.min_samples_leaf))
    throw std::invalid_argument("fewer rows than min_samples_leaf");
  if (data.rows() > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("training set too large");

  const std::size_t n = data.rows();
  std::vector<Order> presorted(data.width(), Order(n));
  for (std::size_t f = 0; f < data.width(); ++f) {
    Order& o = presorted[f];
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return data.input(a, f) < data.input(b, f);
    });
  }

  Forest forest;
  forest.width_ = data.width();
  forest.params_ = params;
  forest.seed_ = seed;
  forest.trees_.resize(static_cast<std::size_t>(params.n_trees));
  const int n_trees = params.n_trees;

  auto build = [&](int t) {
    TreeBuilder builder{data, presorted, params, tree_rng(seed, static_cast<std::size_t>(t)),
                        {}, {}, {}, {}, {}};
    forest.trees_[static_cast<std::size_t>(t)] = builder.build();
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < n_trees; ++t) build(t);
  } else {
    for (int t = 0; t < n_trees; ++t) build(t);
  }
  return forest;
}

double Forest::predict(std::span<const double> row) const {
  if (row.size() != width_)
    throw std::invalid_argument("row width " + std::to_string(row.size()) + " != forest width " +
                                std::to_string(width_));
  double sum = 0.0;
  for (const RegressionTree& t : trees_) sum += t.predict(row);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> Forest::predict_range(std::span<const double> row, std::size_t feature,
                                          int lo, int hi) const {
  if (row.size() != width_ || feature >= width_)
    throw std::invalid_argument("row width or feature index does not match the forest");
  if (lo > hi) return {};
  std::vector<double> out(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (const RegressionTree& t : trees_) t.accumulate_range(row, feature, lo, hi, out);
  const double n = static_cast<double>(trees_.size());
  for (double& v : out) v /= n;
  return out;
}

void Forest::save(std::ostream& out) const {
  out << "evfleet-forest 1\n";
  out << "width " << width_ << '\n';
  out << "params " << params_.n_trees << ' ' << params_.min_samples_leaf << ' '
      << params_.max_depth << ' ' << params_.features_per_split << ' '
      << (params_.bootstrap ? 1 : 0) << '\n';
  out << "seed " << seed_ << '\n';
  out << "trees " << trees_.size() << '\n';
  for (const RegressionTree& t : trees_) {
    out << "tree " << t.nodes().size() << '\n';
    for (const TreeNode& n : t.nodes())
      out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right
          << ' ' << format_double(n.value) << '\n';
  }
}

Forest Forest::load(std::istream& in) {
  expect_word(in, "evfleet-forest");
  if (parse_token<int>(in, "version") != 1) throw std::runtime_error("unsupported forest version");
  Forest f;
  expect_word(in, "width");
  f.width_ = parse_token<std::size_t>(in, "width");
  expect_word(in, "params");
  f.params_.n_trees = parse_token<int>(in, "n_trees");
  f.params_.min_samples_leaf = parse_token<int>(in, "min_samples_leaf");
  f.params_.max_depth = parse_token<int>(in, "max_depth");
  f.params_.features_per_split = parse_token<int>(in, "features_per_split");
  f.params_.bootstrap = parse_token<int>(in, "bootstrap") != 0;
  expect_word(in, "seed");
  f.seed_ = parse_token<std::uint64_t>(in, "seed");
  expect_word(in, "trees");
  const auto n_trees = parse_token<std::size_t>(in, "tree count");
  f.trees_.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    expect_word(in, "tree");
    const auto n_nodes = parse_token<std::size_t>(in, "node count");
    std::vector<TreeNode> nodes(n_nodes);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      TreeNode& n = nodes[i];
      n.feature = parse_token<std::int32_t>(in, "feature");
      n.threshold = parse_token<double>(in, "threshold");
      n.left = parse_token<std::int32_t>(in, "left");
      n.right = parse_token<std::int32_t>(in, "right");
      n.value = parse_token<double>(in, "value");
      const auto limit = static_cast<std::int32_t>(n_nodes);
      if (n.feature >= static_cast<std::int32_t>(f.width_) ||
          (n.feature >= 0 && (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) ||
                              n.left >= limit || n.right >= limit)))
        throw std::runtime_error("forest file: malformed node");
    }
    if (nodes.empty()) throw std::runtime_error("forest file: empty tree");
    f.trees_.emplace_back(std::move(nodes));
  }
  return f;
}

void Forest::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save(out);
}

Forest Forest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load(in);
}

bool operator==(const Forest& a, const Forest& b) {
  if (a.width_ != b.width_ || a.seed_ != b.seed_ || a.trees_.size() != b.trees_.size()) return false;
  const ForestParams& p = a.params_;
  const ForestParams& q = b.params_;
  if (p.n_trees != q.n_trees || p.min_samples_leaf != q.min_samples_leaf ||
      p.max_depth != q.max_depth || p.features_per_split != q.features_per_split ||
      p.bootstrap != q.bootstrap)
    return false;
  for (std::size_t t = 0; t < a.trees_.size(); ++t) {
    const auto& x = a.trees_[t].nodes();
    const auto& y = b.trees_[t].nodes();
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].feature != y[i].feature || x[i].left != y[i].left || x[i].right != y[i].right)
        return false;
      // Bitwise: round trips must not drift by an ulp.
      if (std::bit_cast<std::uint64_t>(x[i].threshold) != std::bit_cast<std::uint64_t>(y[i].threshold) ||
          std::bit_cast<std::uint64_t>(x[i].value) != std::bit_cast<std::uint64_t>(y[i].value))
        return false;
    }
  }
  return true;
}

}  // namespace evfleet
