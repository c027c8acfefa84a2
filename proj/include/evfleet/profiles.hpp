#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace evfleet {

constexpr int kMinutesPerDay = 1440;

// One day of exogenous signals sampled every `step_minutes`.
struct DayProfile {
  int step_minutes = 10;
  std::vector<double> reference_power;  // kW, load-following target
  std::vector<double> pv_power;         // kW
  int day_type = 3;                     // 1 cloudy .. 3 clear

  std::size_t steps() const { return reference_power.size(); }
  double reference_at(int minute) const;
  double pv_at(int minute) const;  // 0 outside [0, 1440)
};

// Constant curve delivering `daily_energy_kwh` over the day.
std::vector<double> flat_reference(double daily_energy_kwh, int step_minutes);

// Power pinned to `floor_kw` inside [start, end) and flat elsewhere, with the
// flat level chosen so the day integrates to `daily_energy_kwh`.
std::vector<double> ramp_reference(double daily_energy_kwh, int ramp_start_min,
                                   int ramp_end_min, double floor_kw,
                                   int step_minutes);

struct PvShape {
  double peak_kw = 45.0;
  int sunrise_min = 480;
  int sunset_min = 1080;
  double noise_sigma = 0.05;  // multiplicative, N(1, sigma), clamped >= 0
};

// Scale applied to the clear-day curve: type 1 -> 0.30, 2 -> 0.65, 3 -> 1.00.
double day_type_scale(int day_type);

// Half-sine between sunrise and sunset scaled by day type.
std::vector<double> synth_pv(int day_type, const PvShape& shape,
                             std::uint64_t noise_seed, int step_minutes);

// Draws a day type in {1,2,3} with the given probabilities.
int draw_day_type(std::span<const double, 3> probabilities,
                  std::uint64_t seed, int day);

struct PvCurve {
  std::vector<double> kw;
  int negatives_clamped = 0;
};

// Reads `minute,kw` rows and resamples to `step_minutes` by linear
// interpolation (held constant past the first/last row).
PvCurve load_pv_csv(const std::filesystem::path& path, int step_minutes);
void write_pv_csv(const std::filesystem::path& path, std::span<const double> kw,
                  int step_minutes);

// Energy in kWh of a curve sampled every `step_minutes`.
double integrate_kwh(std::span<const double> kw, int step_minutes);

}  // namespace evfleet
