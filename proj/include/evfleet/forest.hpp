#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace evfleet {

// Row-major regression dataset.
class TrainSet {
 public:
  TrainSet() = default;
  explicit TrainSet(std::size_t width) : width_(width) {}

  void add(std::span<const double> row, double target);
  void reserve(std::size_t rows);

  std::size_t width() const { return width_; }
  std::size_t rows() const { return targets_.size(); }
  std::span<const double> row(std::size_t i) const {
    return {inputs_.data() + i * width_, width_};
  }
  double input(std::size_t i, std::size_t f) const { return inputs_[i * width_ + f]; }
  const std::vector<double>& targets() const { return targets_; }
  std::vector<double>& targets() { return targets_; }

  // Throws std::invalid_argument on empty data or non-finite values.
  void validate() const;

 private:
  std::size_t width_ = 0;
  std::vector<double> inputs_;
  std::vector<double> targets_;
};

struct ForestParams {
  int n_trees = 50;
  int min_samples_leaf = 5;
  int max_depth = 12;          // <= 0: unlimited
  int features_per_split = 0;  // <= 0: ceil(P / 3)
  bool bootstrap = true;

  int split_features(std::size_t width) const;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x < threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // mean target of the training rows routed here
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> row) const;

  // out[v - lo] += prediction with feature `feature` set to v, for every
  // integer v in [lo, hi]; the remaining features come from `row`.
  void accumulate_range(std::span<const double> row, std::size_t feature, int lo,
                        int hi, std::span<double> out) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const;

 private:
  void accumulate_node(std::int32_t node, std::span<const double> row,
                       std::size_t feature, int lo, int hi, int base,
                       std::span<double> out) const;

  std::vector<TreeNode> nodes_;
};

class Forest {
 public:
  Forest() = default;

  // Trees are trained concurrently (OpenMP); each tree draws from its own
  // generator seeded by (seed, tree index), so the result is identical to
  // fit_serial.
  static Forest fit(const TrainSet& data, const ForestParams& params,
                    std::uint64_t seed);
  static Forest fit_serial(const TrainSet& data, const ForestParams& params,
                           std::uint64_t seed);

  double predict(std::span<const double> row) const;

  // Predictions for feature `feature` set to each integer in [lo, hi].
  std::vector<double> predict_range(std::span<const double> row,
                                    std::size_t feature, int lo, int hi) const;

  std::size_t width() const { return width_; }
  const ForestParams& params() const { return params_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  void save(std::ostream& out) const;
  static Forest load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Forest load(const std::filesystem::path& path);

  friend bool operator==(const Forest& a, const Forest& b);

 private:
  static Forest fit_impl(const TrainSet& data, const ForestParams& params,
                         std::uint64_t seed, bool parallel);

  std::size_t width_ = 0;
  ForestParams params_;
  std::uint64_t seed_ = 0;
  std::vector<RegressionTree> trees_;
};

}  // namespace evfleet
