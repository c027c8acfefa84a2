#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "evfleet/fleet_env.hpp"
#include "evfleet/forest.hpp"
#include "evfleet/fqi.hpp"
#include "evfleet/profiles.hpp"

namespace evfleet {

enum class PvSource { Synthetic, File };

struct RunConfig {
  CaseKind kind = CaseKind::LoadFollowing;
  int days = 75;
  double gamma = 0.95;
  int k_max = 25;
  ExplorerConfig explorer;
  ForestParams forest;
  FleetConfig fleet;

  double daily_energy_kwh = 750.0;
  int ramp_start_min = 1020;
  int ramp_end_min = 1260;
  double ramp_floor_kw = 0.0;

  PvSource pv_source = PvSource::Synthetic;
  std::filesystem::path pv_file;
  int pv_file_day_type = 3;
  PvShape pv;
  std::array<double, 3> day_type_probs{0.2, 0.3, 0.5};

  std::uint64_t seed = 1;
  int eval_days = 10;
  std::filesystem::path out_dir = "out";

  // Throws ConfigError on any constraint violation.
  void validate() const;
  // key=value lines understood by parse_config.
  std::string to_text() const;
};

// Layered settings: defaults for the case, then the file, then flags. Keys
// left as "auto" (days, deadline_mode, daily_energy_kwh, pv_peak_kw) resolve
// from the case and fleet size.
class ConfigBuilder {
 public:
  void set(const std::string& key, const std::string& value);  // ConfigError on unknown key
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  RunConfig build() const;

  static bool known_key(const std::string& key);

 private:
  std::map<std::string, std::string> values_;
};

RunConfig parse_config_text(const std::string& text);

}  // namespace evfleet
