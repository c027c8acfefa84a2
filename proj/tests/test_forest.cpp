#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "evfleet/forest.hpp"

using namespace evfleet;

namespace {

TrainSet random_set(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> coarse(0, 6);
  TrainSet s(p);
  std::vector<double> row(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < p; ++f) row[f] = f % 2 ? coarse(rng) : u(rng);
    const double y = 3.0 * (row[0] > 0) + row[1] * row[1] - (p > 2 ? row[2] : 0.0) + 0.3 * u(rng);
    s.add(row, y);
  }
  return s;
}

ForestParams exact_tree(int depth) {
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.min_samples_leaf = 1;
  p.max_depth = depth;
  p.features_per_split = 1000;  // all features
  return p;
}

struct ScanResult {
  double threshold;
  double sse;
  double left_mean;
  double right_mean;
};

// Every midpoint between distinct sorted values, scored by the children's SSE.
ScanResult exhaustive_scan(const std::vector<double>& x, const std::vector<double>& y, int min_leaf) {
  std::vector<double> cuts(x);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  ScanResult best{0, std::numeric_limits<double>::infinity(), 0, 0};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double t = (cuts[i] + cuts[i + 1]) / 2.0;
    double sl = 0, sr = 0;
    int nl = 0, nr = 0;
    for (std::size_t k = 0; k < x.size(); ++k) (x[k] < t ? (sl += y[k], ++nl) : (sr += y[k], ++nr));
    if (nl < min_leaf || nr < min_leaf) continue;
    const double ml = sl / nl, mr = sr / nr;
    double sse = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double d = y[k] - (x[k] < t ? ml : mr);
      sse += d * d;
    }
    if (std::isinf(best.sse) || sse < best.sse - 1e-9 * (1 + best.sse)) best = {t, sse, ml, mr};
  }
  return best;
}

}  // namespace

TEST_CASE("constant targets") {
  TrainSet s(2);
  for (int i = 0; i < 30; ++i) s.add(std::vector<double>{double(i), double(i % 3)}, 3.7);
  const Forest f = Forest::fit(s, ForestParams{}, 1);
  for (double x = -3; x < 40; x += 0.7) CHECK(f.predict(std::vector<double>{x, 1.0}) == doctest::Approx(3.7));
  for (const auto& t : f.trees()) CHECK(t.nodes().size() == 1);
}

TEST_CASE("one-dimensional step is split where the exhaustive scan says") {
  TrainSet s(1);
  std::vector<double> xs, ys;
  for (int x = 0; x < 10; ++x) {
    xs.push_back(x);
    ys.push_back(x < 5 ? 0.0 : 10.0);
    s.add(std::vector<double>{double(x)}, ys.back());
  }
  const ScanResult oracle = exhaustive_scan(xs, ys, 1);
  CHECK(oracle.threshold == 4.5);
  const Forest f = Forest::fit(s, exact_tree(1), 3);
  const TreeNode& root = f.trees()[0].nodes()[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == oracle.threshold);
  CHECK(root.threshold > 4.0);
  CHECK(root.threshold <= 5.0);
  CHECK(f.trees()[0].nodes()[static_cast<std::size_t>(root.left)].value == 0.0);
  CHECK(f.trees()[0].nodes()[static_cast<std::size_t>(root.right)].value == 10.0);
}

TEST_CASE("root split minimises the children's squared error") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0, 1);
    std::uniform_int_distribution<int> grid(0, 40);
    TrainSet s(1);
    std::vector<double> xs, ys;
    for (int i = 0; i < 60; ++i) {
      const double x = grid(rng) / 4.0;
      const double y = std::sin(x) * 3 + noise(rng);
      xs.push_back(x);
      ys.push_back(y);
      s.add(std::vector<double>{x}, y);
    }
    ForestParams p = exact_tree(1);
    p.min_samples_leaf = 3;
    const ScanResult oracle = exhaustive_scan(xs, ys, 3);
    const Forest f = Forest::fit(s, p, seed);
    const TreeNode& root = f.trees()[0].nodes()[0];
    CHECK(root.threshold == doctest::Approx(oracle.threshold));
    CHECK(f.trees()[0].nodes()[static_cast<std::size_t>(root.left)].value == doctest::Approx(oracle.left_mean));
    CHECK(f.trees()[0].nodes()[static_cast<std::size_t>(root.right)].value == doctest::Approx(oracle.right_mean));
  }
}

TEST_CASE("predictions stay inside the target range") {
  const TrainSet s = random_set(400, 5, 7);
  const auto [lo, hi] = std::minmax_element(s.targets().begin(), s.targets().end());
  const Forest f = Forest::fit(s, ForestParams{}, 11);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> row(5);
    for (double& v : row) v = u(rng);
    const double y = f.predict(row);
    CHECK(y >= *lo);
    CHECK(y <= *hi);
  }
}

TEST_CASE("fits are reproducible and independent of threading") {
  const TrainSet s = random_set(300, 4, 5);
  ForestParams p;
  p.n_trees = 12;
  const Forest a = Forest::fit(s, p, 42);
  const Forest b = Forest::fit(s, p, 42);
  const Forest serial = Forest::fit_serial(s, p, 42);
  CHECK(a == b);
  CHECK(a == serial);
  CHECK_FALSE(a == Forest::fit(s, p, 43));
  std::vector<double> probe{0.5, 2, -1, 3};
  CHECK(a.predict(probe) == serial.predict(probe));
}

TEST_CASE("single tree forest returns the tree's leaf value") {
  const TrainSet s = random_set(100, 3, 1);
  ForestParams p;
  p.n_trees = 1;
  const Forest f = Forest::fit(s, p, 3);
  for (std::size_t i = 0; i < s.rows(); ++i) CHECK(f.predict(s.row(i)) == f.trees()[0].predict(s.row(i)));
}

TEST_CASE("unlimited tree memorises distinct inputs") {
  const TrainSet s = random_set(200, 3, 9);
  const Forest f = Forest::fit(s, exact_tree(0), 1);
  double mse = 0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const double d = f.predict(s.row(i)) - s.targets()[i];
    mse += d * d;
  }
  CHECK(mse == 0.0);
}

TEST_CASE("depth and leaf limits hold") {
  const TrainSet s = random_set(500, 4, 3);
  ForestParams p;
  p.n_trees = 5;
  p.max_depth = 4;
  p.min_samples_leaf = 7;
  p.bootstrap = false;
  const Forest f = Forest::fit(s, p, 2);
  for (const auto& t : f.trees()) {
    CHECK(t.depth() <= 4);
    // Count rows per leaf.
    std::vector<int> hits(t.nodes().size(), 0);
    for (std::size_t i = 0; i < s.rows(); ++i) {
      std::int32_t n = 0;
      while (t.nodes()[static_cast<std::size_t>(n)].feature >= 0) {
        const TreeNode& node = t.nodes()[static_cast<std::size_t>(n)];
        n = s.input(i, static_cast<std::size_t>(node.feature)) < node.threshold ? node.left : node.right;
      }
      ++hits[static_cast<std::size_t>(n)];
    }
    for (std::size_t k = 0; k < hits.size(); ++k)
      if (t.nodes()[k].feature < 0) CHECK(hits[k] >= 7);
  }
}

TEST_CASE("row order does not change a deterministic tree") {
  const TrainSet s = random_set(150, 3, 4);
  std::vector<std::size_t> idx(s.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(8));
  TrainSet shuffled(3);
  for (std::size_t i : idx) shuffled.add(s.row(i), s.targets()[i]);
  ForestParams p = exact_tree(6);
  p.min_samples_leaf = 3;
  const Forest a = Forest::fit(s, p, 1);
  const Forest b = Forest::fit(shuffled, p, 99);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> row{u(rng), std::round(u(rng)), u(rng)};
    CHECK(a.predict(row) == doctest::Approx(b.predict(row)).epsilon(1e-12));
  }
}

TEST_CASE("homogeneous cells are reproduced") {
  TrainSet s(2);
  for (int rep = 0; rep < 4; ++rep)
    for (int st = 0; st < 3; ++st)
      for (int a = 0; a < 2; ++a) s.add(std::vector<double>{double(st), double(a)}, 10.0 * st - 3.5 * a + 0.25);
  const Forest f = Forest::fit(s, exact_tree(0), 1);
  for (int st = 0; st < 3; ++st)
    for (int a = 0; a < 2; ++a)
      CHECK(std::abs(f.predict(std::vector<double>{double(st), double(a)}) - (10.0 * st - 3.5 * a + 0.25)) < 1e-9);
}

TEST_CASE("range prediction equals pointwise prediction") {
  const TrainSet s = random_set(400, 4, 12);
  const Forest f = Forest::fit(s, ForestParams{}, 6);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> row{u(rng), 0.0, u(rng), u(rng)};
    const int lo = -2 + i % 3;
    const int hi = lo + i % 9;
    const auto range = f.predict_range(row, 1, lo, hi);
    REQUIRE(range.size() == static_cast<std::size_t>(hi - lo + 1));
    for (int a = lo; a <= hi; ++a) {
      row[1] = a;
      CHECK(range[static_cast<std::size_t>(a - lo)] == f.predict(row));
    }
  }
  CHECK(f.predict_range(std::vector<double>(4, 0.0), 1, 3, 2).empty());
}

TEST_CASE("serialisation round trip is exact") {
  const TrainSet s = random_set(200, 3, 2);
  const Forest f = Forest::fit(s, ForestParams{}, 77);
  std::stringstream ss;
  f.save(ss);
  const Forest g = Forest::load(ss);
  CHECK(f == g);
  std::stringstream again;
  g.save(again);
  std::stringstream first;
  f.save(first);
  CHECK(again.str() == first.str());

  std::string text = first.str();
  std::stringstream bad(text.substr(0, text.size() / 2));
  CHECK_THROWS(Forest::load(bad));
  std::stringstream wrong("evfleet-forest 2\n");
  CHECK_THROWS(Forest::load(wrong));
}

TEST_CASE("input errors") {
  TrainSet empty(3);
  CHECK_THROWS_AS(Forest::fit(empty, ForestParams{}, 1), std::invalid_argument);
  TrainSet nan(1);
  nan.add(std::vector<double>{std::nan("")}, 1.0);
  CHECK_THROWS_AS(Forest::fit(nan, exact_tree(1), 1), std::invalid_argument);
  TrainSet inf(1);
  inf.add(std::vector<double>{1.0}, std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(Forest::fit(inf, exact_tree(1), 1), std::invalid_argument);
  TrainSet few(1);
  few.add(std::vector<double>{1.0}, 1.0);
  CHECK_THROWS_AS(Forest::fit(few, ForestParams{}, 1), std::invalid_argument);  // min leaf 5
  CHECK_THROWS_AS(few.add(std::vector<double>{1.0, 2.0}, 0.0), std::invalid_argument);

  const Forest f = Forest::fit(random_set(50, 3, 1), ForestParams{}, 1);
  CHECK_THROWS_AS(f.predict(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("features per split default") {
  ForestParams p;
  CHECK(p.split_features(9) == 3);
  CHECK(p.split_features(11) == 4);
  CHECK(p.split_features(1) == 1);
  p.features_per_split = 20;
  CHECK(p.split_features(9) == 9);
}
