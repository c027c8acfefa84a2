#include "evfleet/profiles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "evfleet/errors.hpp"

namespace evfleet {

namespace {

std::size_t steps_per_day(int step_minutes) {
  if (step_minutes <= 0 || kMinutesPerDay % step_minutes != 0)
    throw std::invalid_argument("step must divide 1440 minutes");
  return static_cast<std::size_t>(kMinutesPerDay / step_minutes);
}

double sample_at(const std::vector<double>& curve, int step_minutes, int minute) {
  if (minute < 0 || minute >= kMinutesPerDay || curve.empty()) return 0.0;
  return curve[static_cast<std::size_t>(minute / step_minutes)];
}

}  // namespace

double DayProfile::reference_at(int minute) const {
  return sample_at(reference_power, step_minutes, minute);
}

double DayProfile::pv_at(int minute) const {
  return sample_at(pv_power, step_minutes, minute);
}

std::vector<double> flat_reference(double daily_energy_kwh, int step_minutes) {
  if (!(daily_energy_kwh > 0.0))
    throw std::invalid_argument("daily energy must be positive");
  return std::vector<double>(steps_per_day(step_minutes), daily_energy_kwh / 24.0);
}

std::vector<double> ramp_reference(double daily_energy_kwh, int ramp_start_min,
                                   int ramp_end_min, double floor_kw,
                                   int step_minutes) {
  if (!(daily_energy_kwh > 0.0))
    throw std::invalid_argument("daily energy must be positive");
  if (ramp_start_min < 0 || ramp_end_min > kMinutesPerDay || ramp_start_min > ramp_end_min)
    throw std::invalid_argument("ramp window must satisfy 0 <= start <= end <= 1440");
  if (floor_kw < 0.0) throw std::invalid_argument("ramp floor must be non-negative");
  const std::size_t n = steps_per_day(step_minutes);
  const int window = ramp_end_min - ramp_start_min;
  if (window == 0) return flat_reference(daily_energy_kwh, step_minutes);

  const double floor_energy = floor_kw * window / 60.0;
  if (floor_energy > daily_energy_kwh)
    throw std::invalid_argument("ramp floor energy exceeds the daily energy");
  const int outside = kMinutesPerDay - window;
  if (outside == 0) {
    if (std::abs(floor_energy - daily_energy_kwh) > 1e-9 * daily_energy_kwh)
      throw std::invalid_argument("whole-day ramp cannot deliver the daily energy");
    return std::vector<double>(n, floor_kw);
  }
  const double level = (daily_energy_kwh - floor_energy) / (outside / 60.0);

  // Steps straddling a window edge get the time-weighted blend.
  std::vector<double> curve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int a = static_cast<int>(i) * step_minutes;
    const int b = a + step_minutes;
    const int inside = std::max(0, std::min(b, ramp_end_min) - std::max(a, ramp_start_min));
    curve[i] = (inside * floor_kw + (step_minutes - inside) * level) / step_minutes;
  }
  return curve;
}

double day_type_scale(int day_type) {
  switch (day_type) {
    case 1: return 0.30;
    case 2: return 0.65;
    case 3: return 1.00;
    default: throw std::invalid_argument("day type must be 1, 2 or 3");
  }
}

std::vector<double> synth_pv(int day_type, const PvShape& shape,
                             std::uint64_t noise_seed, int step_minutes) {
  const double scale = day_type_scale(day_type);
  if (shape.sunrise_min >= shape.sunset_min)
    throw std::invalid_argument("sunrise must precede sunset");
  if (shape.peak_kw < 0.0 || shape.noise_sigma < 0.0)
    throw std::invalid_argument("PV peak and noise must be non-negative");
  const std::size_t n = steps_per_day(step_minutes);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(1.0, shape.noise_sigma > 0.0 ? shape.noise_sigma : 1.0);
  const double span = shape.sunset_min - shape.sunrise_min;

  std::vector<double> curve(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * step_minutes;
    if (t < shape.sunrise_min || t > shape.sunset_min) continue;
    double v = scale * shape.peak_kw *
               std::sin(std::numbers::pi * (t - shape.sunrise_min) / span);
    if (shape.noise_sigma > 0.0) v *= noise(rng);
    curve[i] = std::max(0.0, v);
  }
  return curve;
}

int draw_day_type(std::span<const double, 3> probabilities, std::uint64_t seed, int day) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(day), 0x9e3779b9u};
  std::mt19937_64 rng(seq);
  std::discrete_distribution<int> pick(probabilities.begin(), probabilities.end());
  return pick(rng) + 1;
}

PvCurve load_pv_csv(const std::filesystem::path& path, int step_minutes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open PV file " + path.string());
  const std::size_t n = steps_per_day(step_minutes);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("PV file is empty: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "minute,kw")
    throw ConfigError("PV file header must be 'minute,kw': " + path.string());

  std::vector<int> minutes;
  std::vector<double> kw;
  PvCurve out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    auto bad = [&](const char* why) {
      return ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (comma == std::string::npos) throw bad("expected 'minute,kw'");
    int minute = 0;
    double value = 0.0;
    const char* first = line.data();
    const char* mid = first + comma;
    const char* last = first + line.size();
    auto r1 = std::from_chars(first, mid, minute);
    if (r1.ec != std::errc() || r1.ptr != mid) throw bad("malformed minute");
    auto r2 = std::from_chars(mid + 1, last, value);
    if (r2.ec != std::errc() || r2.ptr != last || !std::isfinite(value))
      throw bad("malformed kW value");
    if (minute < 0 || minute >= kMinutesPerDay) throw bad("minute outside 0..1439");
    if (!minutes.empty() && minute <= minutes.back()) throw bad("minutes must strictly increase");
    if (value < 0.0) {
      value = 0.0;
      ++out.negatives_clamped;
    }
    minutes.push_back(minute);
    kw.push_back(value);
  }
  if (minutes.empty()) throw ConfigError("PV file has no rows: " + path.string());

  out.kw.resize(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * step_minutes;
    while (j + 1 < minutes.size() && minutes[j + 1] <= t) ++j;
    if (t <= minutes.front()) {
      out.kw[i] = kw.front();
    } else if (j + 1 >= minutes.size()) {
      out.kw[i] = kw.back();
    } else {
      const double w = (t - minutes[j]) / static_cast<double>(minutes[j + 1] - minutes[j]);
      out.kw[i] = kw[j] + w * (kw[j + 1] - kw[j]);
    }
  }
  return out;
}

void write_pv_csv(const std::filesystem::path& path, std::span<const double> kw,
                  int step_minutes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "minute,kw\n";
  char buf[64];
  for (std::size_t i = 0; i < kw.size(); ++i) {
    auto r = std::to_chars(buf, buf + sizeof buf, kw[i]);
    out << i * static_cast<std::size_t>(step_minutes) << ',' << std::string_view(buf, r.ptr - buf)
        << '\n';
  }
}

double integrate_kwh(std::span<const double> kw, int step_minutes) {
  double sum = 0.0;
  for (double v : kw) sum += v;
  return sum * step_minutes / 60.0;
}

}  // namespace evfleet
