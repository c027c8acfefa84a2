#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evfleet/errors.hpp"
#include "evfleet/runner.hpp"

using namespace evfleet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("evfleet_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& p) {
  const std::string s = slurp(p);
  return s.substr(0, s.find('\n'));
}

RunConfig tiny_config(int kind, const fs::path& out) {
  ConfigBuilder b;
  b.set("case", std::to_string(kind));
  b.set("days", "2");
  b.set("evs", "10");
  b.set("k_max", "3");
  b.set("n_trees", "5");
  b.set("eval_days", "1");
  b.set("seed", "7");
  b.set("out", out.string());
  return b.build();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(EVFLEET_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("case defaults") {
  ConfigBuilder b;
  RunConfig c = b.build();
  CHECK(c.kind == CaseKind::LoadFollowing);
  CHECK(c.days == 75);
  CHECK(c.gamma == 0.95);
  CHECK(c.k_max == 25);
  CHECK(c.fleet.size == 100);
  CHECK(c.fleet.step_minutes == 10);
  CHECK(c.fleet.control_minutes == 20);
  CHECK(c.explorer.epsilon_floor == 0.05);
  CHECK(c.explorer.total_days == 75);

  b.set("case", "2");
  c = b.build();
  CHECK(c.kind == CaseKind::PvCoincident);
  CHECK(c.days == 60);
  CHECK(c.explorer.total_days == 60);

  b.set("days", "12");
  CHECK(b.build().explorer.total_days == 12);
}

TEST_CASE("config errors") {
  ConfigBuilder b;
  CHECK_THROWS_AS(b.set("no_such_key", "1"), ConfigError);
  b.set("delta_c", "15");
  CHECK_THROWS_AS(b.build(), ConfigError);
  ConfigBuilder g;
  g.set("gamma", "1.0");
  CHECK_THROWS_AS(g.build(), ConfigError);
  ConfigBuilder n;
  n.set("days", "ten");
  CHECK_THROWS_AS(n.build(), ConfigError);
  ConfigBuilder pv;
  pv.set("case", "2");
  pv.set("pv_source", "file");
  pv.set("pv_file", "/nonexistent/pv.csv");
  CHECK_THROWS_AS(pv.build(), ConfigError);
  ConfigBuilder text;
  CHECK_THROWS_AS(text.load_text("days = 3\nbogus = 1\n", "cfg"), ConfigError);
  try {
    text.load_text("days = 3\nbogus = 1\n", "cfg");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }
}

TEST_CASE("layered precedence and text round trip") {
  ConfigBuilder b;
  b.load_text("# comment\ndays = 75\nevs = 40\n\ngamma = 0.9\n");
  b.set("days", "10");
  const RunConfig c = b.build();
  CHECK(c.days == 10);
  CHECK(c.fleet.size == 40);
  CHECK(c.gamma == 0.9);
  CHECK(c.daily_energy_kwh == doctest::Approx(7.5 * 40));

  const RunConfig back = parse_config_text(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.days == 10);
  CHECK(back.gamma == 0.9);
}

TEST_CASE("phase windows clip to the run") {
  std::vector<DayMetrics> m(40);
  for (int d = 0; d < 40; ++d) {
    m[static_cast<std::size_t>(d)].day = d;
    m[static_cast<std::size_t>(d)].total_reward = d;
    m[static_cast<std::size_t>(d)].pv_utilization = d / 100.0;
  }
  const PhaseSummary r = phase_summary(m, false);
  CHECK(r.initial == 2.0);
  CHECK(r.mid == 36.0);
  CHECK(r.final == 37.0);
  CHECK(phase_summary(m, true).final == doctest::Approx(0.37));
  const PhaseSummary s = phase_summary(std::span<const DayMetrics>(m).first(3), false);
  CHECK(s.initial == 1.0);
  CHECK(std::isnan(s.mid));
}

TEST_CASE("case run writes every artifact") {
  const fs::path out = scratch("run0");
  const RunConfig cfg = tiny_config(0, out);
  const CaseArtifacts art = run_case(cfg);
  for (const char* f : {"trace.csv", "metrics.csv", "comparison.csv", "eval_trace.csv", "model.txt", "summary.txt"})
    CHECK(fs::exists(out / f));
  CHECK(first_line(out / "trace.csv") == "day,minute,p_ref_kw,pv_kw,charge_kw,forced_kw,n_min,n_max,reward");
  CHECK(first_line(out / "metrics.csv") == "day,epsilon,total_reward,final_convergence,pv_utilization,forced_energy_kwh");
  CHECK(first_line(out / "comparison.csv") == "day,policy_reward,oracle_reward,policy_utilization,oracle_utilization");
  CHECK(art.training.metrics.size() == 2);
  CHECK(art.comparison.rows.size() == 1);

  // 144 ticks per day plus a header.
  const std::string trace = slurp(out / "trace.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 1 + 2 * 144);
  for (const TraceRecord& r : art.training.trace) {
    CHECK(r.forced_kw >= 0.0);
    CHECK(r.charge_kw >= r.forced_kw - 1e-9);
    CHECK(r.n_min <= r.n_max);
  }
  const std::string summary = slurp(out / "summary.txt");
  CHECK(summary.find("reward_final") != std::string::npos);
  CHECK(summary.find("pv_utilization_final") == std::string::npos);
}

TEST_CASE("PV case summary reports utilization") {
  const fs::path out = scratch("run2");
  run_case(tiny_config(2, out));
  const std::string summary = slurp(out / "summary.txt");
  CHECK(summary.find("pv_utilization_final") != std::string::npos);
  CHECK(summary.find("eval_oracle_pv_utilization") != std::string::npos);
}

TEST_CASE("identical seeds give identical bytes") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  RunConfig ca = tiny_config(1, a), cb = tiny_config(1, b);
  run_case(ca);
  run_case(cb);
  for (const char* f : {"trace.csv", "metrics.csv", "comparison.csv", "eval_trace.csv", "model.txt", "summary.txt"}) {
    if (std::string(f) == "model.txt") continue;  // embeds the output path
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const fs::path c = scratch("det_c");
  RunConfig cc = tiny_config(1, c);
  cc.seed = 8;
  run_case(cc);
  CHECK(slurp(a / "trace.csv") != slurp(c / "trace.csv"));
}

TEST_CASE("model save, load and replay") {
  const fs::path out = scratch("model");
  const RunConfig cfg = tiny_config(0, out);
  const CaseArtifacts art = run_case(cfg);
  const LoadedModel loaded = load_model(out / "model.txt");
  CHECK(loaded.config.to_text() == cfg.to_text());
  REQUIRE(!loaded.model.empty());
  CHECK(*loaded.model.forest() == *art.training.model.forest());

  const auto t1 = replay(loaded, 5);
  const auto t2 = replay(loaded, 5);
  REQUIRE(t1.size() == 144);
  CHECK(t1 == t2);

  LoadedModel wrong = loaded;
  wrong.config.kind = CaseKind::PvCoincident;
  CHECK_THROWS_AS(replay(wrong, 5), ConfigError);

  save_model(out / "empty.txt", cfg, QModel{});
  CHECK(load_model(out / "empty.txt").model.empty());

  std::ofstream(out / "bad.txt") << "not a model\n";
  CHECK_THROWS_AS(load_model(out / "bad.txt"), ConfigError);
  CHECK_THROWS(load_model(out / "missing.txt"));
}

TEST_CASE("command line exit codes") {
  const fs::path out = scratch("cli");
  CHECK(cli("--help") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("run --bogus") == 2);
  CHECK(cli("run --set delta_c=15 --out " + out.string()) == 2);
  CHECK(cli("run --case 2 --pv-file /nonexistent.csv --out " + out.string()) == 2);
  CHECK(cli("run --case 0 --days 1 --evs 8 --set k_max=2 --set n_trees=3 --set eval_days=1 --out " +
            out.string()) == 0);
  CHECK(fs::exists(out / "summary.txt"));
  CHECK(cli("replay --model " + (out / "model.txt").string() + " --seed 3 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "replay_trace.csv"));
  CHECK(cli("replay --model " + (out / "model.txt").string() + " --set case=2 --out " + out.string()) == 2);
  CHECK(cli("replay") == 2);
}
