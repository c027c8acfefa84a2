#include "evfleet/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "evfleet/errors.hpp"

namespace evfleet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end)
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "' (expected true/false)");
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T>
Setter int_field(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.*field = parse_number<T>(k, v);
  };
}

// Keys other than "case" and the auto-resolved ones, applied in this order.
const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"days", int_field(&RunConfig::days)},
      {"evs", [](RunConfig& c, auto& k, auto& v) { c.fleet.size = parse_number<int>(k, v); }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.gamma = parse_number<double>(k, v); }},
      {"k_max", int_field(&RunConfig::k_max)},
      {"delta_s", [](RunConfig& c, auto& k, auto& v) { c.fleet.step_minutes = parse_number<int>(k, v); }},
      {"delta_c", [](RunConfig& c, auto& k, auto& v) { c.fleet.control_minutes = parse_number<int>(k, v); }},
      {"epsilon_floor", [](RunConfig& c, auto& k, auto& v) { c.explorer.epsilon_floor = parse_number<double>(k, v); }},
      {"c0", [](RunConfig& c, auto& k, auto& v) { c.explorer.decay = parse_number<double>(k, v); }},
      {"n_trees", [](RunConfig& c, auto& k, auto& v) { c.forest.n_trees = parse_number<int>(k, v); }},
      {"min_leaf", [](RunConfig& c, auto& k, auto& v) { c.forest.min_samples_leaf = parse_number<int>(k, v); }},
      {"max_depth", [](RunConfig& c, auto& k, auto& v) { c.forest.max_depth = parse_number<int>(k, v); }},
      {"features_per_split", [](RunConfig& c, auto& k, auto& v) { c.forest.features_per_split = parse_number<int>(k, v); }},
      {"bootstrap", [](RunConfig& c, auto& k, auto& v) { c.forest.bootstrap = parse_bool(k, v); }},
      {"departure_mean", [](RunConfig& c, auto& k, auto& v) { c.fleet.mean_departure = parse_number<double>(k, v); }},
      {"departure_sigma", [](RunConfig& c, auto& k, auto& v) { c.fleet.sigma_departure = parse_number<double>(k, v); }},
      {"arrival_mean", [](RunConfig& c, auto& k, auto& v) { c.fleet.mean_arrival = parse_number<double>(k, v); }},
      {"arrival_sigma", [](RunConfig& c, auto& k, auto& v) { c.fleet.sigma_arrival = parse_number<double>(k, v); }},
      {"departure_daily_sigma", [](RunConfig& c, auto& k, auto& v) { c.fleet.daily_sigma_departure = parse_number<double>(k, v); }},
      {"arrival_daily_sigma", [](RunConfig& c, auto& k, auto& v) { c.fleet.daily_sigma_arrival = parse_number<double>(k, v); }},
      {"travel_minutes", [](RunConfig& c, auto& k, auto& v) { c.fleet.travel_minutes = parse_number<int>(k, v); }},
      {"soc_loss_mean", [](RunConfig& c, auto& k, auto& v) { c.fleet.soc_loss_mean = parse_number<double>(k, v); }},
      {"soc_loss_sigma", [](RunConfig& c, auto& k, auto& v) { c.fleet.soc_loss_sigma = parse_number<double>(k, v); }},
      {"soc_loss_min", [](RunConfig& c, auto& k, auto& v) { c.fleet.soc_loss_min = parse_number<double>(k, v); }},
      {"soc_loss_max", [](RunConfig& c, auto& k, auto& v) { c.fleet.soc_loss_max = parse_number<double>(k, v); }},
      {"battery_kwh", [](RunConfig& c, auto& k, auto& v) { c.fleet.ev.battery_capacity_kwh = parse_number<double>(k, v); }},
      {"max_charge_kw", [](RunConfig& c, auto& k, auto& v) { c.fleet.ev.max_charge_kw = parse_number<double>(k, v); }},
      {"deadline_mode", [](RunConfig& c, auto& k, auto& v) {
         if (v == "every") c.fleet.deadline_mode = DeadlineMode::EveryDeparture;
         else if (v == "home") c.fleet.deadline_mode = DeadlineMode::HomeDepartureOnly;
         else throw ConfigError("bad value for " + k + ": '" + v + "' (expected every/home/auto)");
       }},
      {"daily_energy_kwh", [](RunConfig& c, auto& k, auto& v) { c.daily_energy_kwh = parse_number<double>(k, v); }},
      {"ramp_start", int_field(&RunConfig::ramp_start_min)},
      {"ramp_end", int_field(&RunConfig::ramp_end_min)},
      {"ramp_floor_kw", [](RunConfig& c, auto& k, auto& v) { c.ramp_floor_kw = parse_number<double>(k, v); }},
      {"pv_source", [](RunConfig& c, auto& k, auto& v) {
         if (v == "synthetic") c.pv_source = PvSource::Synthetic;
         else if (v == "file") c.pv_source = PvSource::File;
         else throw ConfigError("bad value for " + k + ": '" + v + "' (expected synthetic/file)");
       }},
      {"pv_file", [](RunConfig& c, auto&, auto& v) { c.pv_file = v; }},
      {"pv_file_day_type", int_field(&RunConfig::pv_file_day_type)},
      {"pv_peak_kw", [](RunConfig& c, auto& k, auto& v) { c.pv.peak_kw = parse_number<double>(k, v); }},
      {"pv_sunrise", [](RunConfig& c, auto& k, auto& v) { c.pv.sunrise_min = parse_number<int>(k, v); }},
      {"pv_sunset", [](RunConfig& c, auto& k, auto& v) { c.pv.sunset_min = parse_number<int>(k, v); }},
      {"pv_noise_sigma", [](RunConfig& c, auto& k, auto& v) { c.pv.noise_sigma = parse_number<double>(k, v); }},
      {"day_type_probs", [](RunConfig& c, auto& k, auto& v) {
         std::stringstream ss(v);
         std::string part;
         std::vector<double> p;
         while (std::getline(ss, part, ',')) p.push_back(parse_number<double>(k, trim(part)));
         if (p.size() != 3) throw ConfigError(k + " needs three comma-separated values");
         c.day_type_probs = {p[0], p[1], p[2]};
       }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"eval_days", int_field(&RunConfig::eval_days)},
      {"out", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
  };
  return table;
}

}  // namespace

bool ConfigBuilder::known_key(const std::string& key) {
  if (key == "case") return true;
  for (const auto& [name, fn] : setters())
    if (name == key) return true;
  return false;
}

void ConfigBuilder::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void ConfigBuilder::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (!known_key(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    values_[key] = value;
  }
}

void ConfigBuilder::load_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  load_text(ss.str(), path.string());
}

RunConfig ConfigBuilder::build() const {
  RunConfig cfg;
  if (auto it = values_.find("case"); it != values_.end()) {
    const int c = parse_number<int>("case", it->second);
    if (c < 0 || c > 2) throw ConfigError("case must be 0, 1 or 2");
    cfg.kind = static_cast<CaseKind>(c);
  }
  const bool pv_case = cfg.kind == CaseKind::PvCoincident;
  cfg.days = pv_case ? 60 : 75;
  cfg.fleet.deadline_mode = pv_case ? DeadlineMode::HomeDepartureOnly : DeadlineMode::EveryDeparture;

  auto is_auto = [&](const std::string& key) {
    auto it = values_.find(key);
    return it == values_.end() || it->second == "auto";
  };
  for (const auto& [key, fn] : setters()) {
    auto it = values_.find(key);
    if (it == values_.end() || it->second == "auto") continue;
    fn(cfg, key, it->second);
  }
  if (is_auto("daily_energy_kwh")) cfg.daily_energy_kwh = 7.5 * cfg.fleet.size;
  if (is_auto("pv_peak_kw")) cfg.pv.peak_kw = 0.45 * cfg.fleet.size;
  cfg.explorer.total_days = cfg.days;
  cfg.validate();
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  ConfigBuilder b;
  b.load_text(text);
  return b.build();
}

void RunConfig::validate() const {
  fleet.validate();
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (days < 1) fail("days must be at least 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (k_max < 1) fail("k_max must be at least 1");
  if (explorer.epsilon_floor < 0 || explorer.epsilon_floor > 1) fail("epsilon_floor must lie in [0, 1]");
  if (explorer.decay < 0) fail("c0 must be non-negative");
  if (forest.n_trees < 1) fail("n_trees must be at least 1");
  if (forest.min_samples_leaf < 1) fail("min_leaf must be at least 1");
  if (!(daily_energy_kwh > 0)) fail("daily_energy_kwh must be positive");
  if (ramp_start_min < 0 || ramp_end_min > kMinutesPerDay || ramp_start_min > ramp_end_min)
    fail("ramp window must satisfy 0 <= ramp_start <= ramp_end <= 1440");
  if (ramp_floor_kw < 0) fail("ramp_floor_kw must be non-negative");
  if (!(pv.peak_kw >= 0)) fail("pv_peak_kw must be non-negative");
  if (pv.sunrise_min < 0 || pv.sunset_min > kMinutesPerDay || pv.sunrise_min >= pv.sunset_min)
    fail("pv window must satisfy 0 <= sunrise < sunset <= 1440");
  if (pv.noise_sigma < 0) fail("pv_noise_sigma must be non-negative");
  double total = 0.0;
  for (double p : day_type_probs) {
    if (p < 0) fail("day_type_probs must be non-negative");
    total += p;
  }
  if (!(total > 0)) fail("day_type_probs must not all be zero");
  if (pv_file_day_type < 1 || pv_file_day_type > 3) fail("pv_file_day_type must be 1, 2 or 3");
  if (kind == CaseKind::PvCoincident && pv_source == PvSource::File) {
    if (pv_file.empty()) fail("pv_source = file needs pv_file");
    if (!std::filesystem::exists(pv_file)) fail("pv file not found: " + pv_file.string());
  }
  if (eval_days < 1) fail("eval_days must be at least 1");
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << '\n'; };
  kv("case", std::to_string(static_cast<int>(kind)));
  kv("days", std::to_string(days));
  kv("evs", std::to_string(fleet.size));
  kv("gamma", fmt(gamma));
  kv("k_max", std::to_string(k_max));
  kv("delta_s", std::to_string(fleet.step_minutes));
  kv("delta_c", std::to_string(fleet.control_minutes));
  kv("epsilon_floor", fmt(explorer.epsilon_floor));
  kv("c0", fmt(explorer.decay));
  kv("n_trees", std::to_string(forest.n_trees));
  kv("min_leaf", std::to_string(forest.min_samples_leaf));
  kv("max_depth", std::to_string(forest.max_depth));
  kv("features_per_split", std::to_string(forest.features_per_split));
  kv("bootstrap", forest.bootstrap ? "true" : "false");
  kv("departure_mean", fmt(fleet.mean_departure));
  kv("departure_sigma", fmt(fleet.sigma_departure));
  kv("arrival_mean", fmt(fleet.mean_arrival));
  kv("arrival_sigma", fmt(fleet.sigma_arrival));
  kv("departure_daily_sigma", fmt(fleet.daily_sigma_departure));
  kv("arrival_daily_sigma", fmt(fleet.daily_sigma_arrival));
  kv("travel_minutes", std::to_string(fleet.travel_minutes));
  kv("soc_loss_mean", fmt(fleet.soc_loss_mean));
  kv("soc_loss_sigma", fmt(fleet.soc_loss_sigma));
  kv("soc_loss_min", fmt(fleet.soc_loss_min));
  kv("soc_loss_max", fmt(fleet.soc_loss_max));
  kv("battery_kwh", fmt(fleet.ev.battery_capacity_kwh));
  kv("max_charge_kw", fmt(fleet.ev.max_charge_kw));
  kv("deadline_mode", fleet.deadline_mode == DeadlineMode::EveryDeparture ? "every" : "home");
  kv("daily_energy_kwh", fmt(daily_energy_kwh));
  kv("ramp_start", std::to_string(ramp_start_min));
  kv("ramp_end", std::to_string(ramp_end_min));
  kv("ramp_floor_kw", fmt(ramp_floor_kw));
  kv("pv_source", pv_source == PvSource::File ? "file" : "synthetic");
  if (!pv_file.empty()) kv("pv_file", pv_file.string());
  kv("pv_file_day_type", std::to_string(pv_file_day_type));
  kv("pv_peak_kw", fmt(pv.peak_kw));
  kv("pv_sunrise", std::to_string(pv.sunrise_min));
  kv("pv_sunset", std::to_string(pv.sunset_min));
  kv("pv_noise_sigma", fmt(pv.noise_sigma));
  kv("day_type_probs", fmt(day_type_probs[0]) + "," + fmt(day_type_probs[1]) + "," + fmt(day_type_probs[2]));
  kv("seed", std::to_string(seed));
  kv("eval_days", std::to_string(eval_days));
  kv("out", out_dir.string());
  return o.str();
}

}  // namespace evfleet
