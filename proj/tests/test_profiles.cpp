#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "evfleet/errors.hpp"
#include "evfleet/profiles.hpp"

using namespace evfleet;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / ("evfleet_" + name);
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

// Energy by minute-level summation, independent of the step grid.
double minute_energy(const std::vector<double>& curve, int step) {
  double e = 0.0;
  for (int m = 0; m < kMinutesPerDay; ++m) e += curve[static_cast<std::size_t>(m / step)] / 60.0;
  return e;
}

}  // namespace

TEST_CASE("flat reference is constant and conserves energy") {
  const auto c = flat_reference(750.0, 10);
  REQUIRE(c.size() == 144);
  for (double v : c) CHECK(v == doctest::Approx(31.25).epsilon(1e-15));
  CHECK(minute_energy(c, 10) == doctest::Approx(750.0).epsilon(1e-12));
  CHECK_THROWS(flat_reference(0.0, 10));
  CHECK_THROWS(flat_reference(-5.0, 10));
}

TEST_CASE("ramp reference pins the window and keeps the total") {
  const auto c = ramp_reference(750.0, 1020, 1260, 0.0, 10);
  for (int m = 0; m < kMinutesPerDay; m += 10) {
    const double v = c[static_cast<std::size_t>(m / 10)];
    if (m >= 1020 && m < 1260) CHECK(v == 0.0);
    else CHECK(v == doctest::Approx(750.0 / 20.0));
  }
  CHECK(minute_energy(c, 10) == doctest::Approx(750.0).epsilon(1e-12));

  // Zero-length window degenerates to the flat curve.
  CHECK(ramp_reference(750.0, 600, 600, 0.0, 10) == flat_reference(750.0, 10));

  // A floor above zero still conserves energy, also with edges off the grid.
  const auto off = ramp_reference(500.0, 1025, 1255, 4.0, 10);
  CHECK(minute_energy(off, 10) == doctest::Approx(500.0).epsilon(1e-12));

  CHECK_THROWS(ramp_reference(10.0, 0, 1200, 1.0, 10));  // 20 kWh floor > 10 kWh
  CHECK_THROWS(ramp_reference(750.0, 1260, 1020, 0.0, 10));
}

TEST_CASE("synthetic PV shape") {
  PvShape s;
  s.peak_kw = 300.0;
  s.sunrise_min = 360;
  s.sunset_min = 1080;
  s.noise_sigma = 0.0;
  const auto clear = synth_pv(3, s, 7, 10);
  REQUIRE(clear.size() == 144);
  // Midpoint 720 is a grid point.
  CHECK(clear[72] == doctest::Approx(300.0));
  CHECK(synth_pv(1, s, 7, 10)[72] == doctest::Approx(0.30 * 300.0));
  CHECK(synth_pv(2, s, 7, 10)[72] == doctest::Approx(0.65 * 300.0));
  for (std::size_t i = 0; i < clear.size(); ++i) {
    const int m = static_cast<int>(i) * 10;
    if (m < 360 || m > 1080) CHECK(clear[i] == 0.0);
    CHECK(clear[i] >= 0.0);
  }
  // Symmetric about the midpoint without noise.
  for (int k = 0; k <= 36; ++k)
    CHECK(clear[static_cast<std::size_t>(72 - k)] == doctest::Approx(clear[static_cast<std::size_t>(72 + k)]).epsilon(1e-12));

  const double e1 = integrate_kwh(synth_pv(1, s, 3, 10), 10);
  const double e2 = integrate_kwh(synth_pv(2, s, 3, 10), 10);
  const double e3 = integrate_kwh(clear, 10);
  CHECK(e1 < e2);
  CHECK(e2 < e3);

  CHECK_THROWS(synth_pv(4, s, 1, 10));
  s.sunset_min = s.sunrise_min;
  CHECK_THROWS(synth_pv(3, s, 1, 10));
}

TEST_CASE("PV noise is seeded and non-negative") {
  PvShape s;
  s.noise_sigma = 0.5;
  const auto a = synth_pv(3, s, 11, 10);
  CHECK(a == synth_pv(3, s, 11, 10));
  CHECK(a != synth_pv(3, s, 12, 10));
  for (double v : a) CHECK(v >= 0.0);
}

TEST_CASE("day type draws follow the probabilities") {
  const std::array<double, 3> p{0.2, 0.3, 0.5};
  std::array<int, 3> counts{};
  const int n = 20000;
  for (int d = 0; d < n; ++d) {
    const int t = draw_day_type(p, 99, d);
    REQUIRE(t >= 1);
    REQUIRE(t <= 3);
    ++counts[static_cast<std::size_t>(t - 1)];
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double sd = std::sqrt(n * p[i] * (1 - p[i]));
    CHECK(std::abs(counts[i] - n * p[i]) < 4 * sd);
  }
  CHECK(draw_day_type(p, 5, 17) == draw_day_type(p, 5, 17));
}

TEST_CASE("PV csv ingestion") {
  SUBCASE("two zero rows") {
    const auto f = temp_file("pv_zero.csv", "minute,kw\n0,0\n1430,0\n");
    const PvCurve c = load_pv_csv(f, 10);
    CHECK(c.kw.size() == 144);
    CHECK(std::all_of(c.kw.begin(), c.kw.end(), [](double v) { return v == 0.0; }));
    CHECK(c.negatives_clamped == 0);
  }
  SUBCASE("hourly rows interpolate linearly") {
    std::string body = "minute,kw\n";
    for (int h = 0; h < 24; ++h) body += std::to_string(h * 60) + "," + std::to_string(h * 6) + "\n";
    const PvCurve c = load_pv_csv(temp_file("pv_hourly.csv", body), 10);
    // kw = minute / 10 up to 1380, then held.
    for (int m = 0; m < kMinutesPerDay; m += 10) {
      const double expect = m <= 1380 ? m / 10.0 : 138.0;
      CHECK(c.kw[static_cast<std::size_t>(m / 10)] == doctest::Approx(expect));
    }
  }
  SUBCASE("negative reading is clamped and counted") {
    const PvCurve c = load_pv_csv(temp_file("pv_neg.csv", "minute,kw\n0,1\n600,-3\n1200,1\n"), 10);
    CHECK(c.negatives_clamped == 1);
    CHECK(c.kw[60] == 0.0);
    CHECK(c.kw[30] == doctest::Approx(0.5));
  }
  SUBCASE("malformed input") {
    CHECK_THROWS_AS(load_pv_csv(temp_file("pv_hdr.csv", "t,kw\n0,1\n"), 10), ConfigError);
    CHECK_THROWS_AS(load_pv_csv(temp_file("pv_order.csv", "minute,kw\n60,1\n30,1\n"), 10), ConfigError);
    CHECK_THROWS_AS(load_pv_csv(temp_file("pv_dup.csv", "minute,kw\n60,1\n60,1\n"), 10), ConfigError);
    CHECK_THROWS_AS(load_pv_csv(temp_file("pv_bad.csv", "minute,kw\n0,abc\n"), 10), ConfigError);
    CHECK_THROWS_AS(load_pv_csv(temp_file("pv_range.csv", "minute,kw\n1440,1\n"), 10), ConfigError);
    CHECK_THROWS_AS(load_pv_csv("/nonexistent/pv.csv", 10), ConfigError);
  }
  SUBCASE("write then read is lossless on the grid") {
    PvShape s;
    const auto curve = synth_pv(2, s, 4, 10);
    const auto f = std::filesystem::temp_directory_path() / "evfleet_pv_rt.csv";
    write_pv_csv(f, curve, 10);
    CHECK(load_pv_csv(f, 10).kw == curve);
  }
}
