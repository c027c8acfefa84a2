#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "evfleet/evaluation.hpp"
#include "evfleet/run_config.hpp"
#include "evfleet/training.hpp"

namespace evfleet {

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRecord> rows);
void write_metrics_csv(const std::filesystem::path& path, std::span<const DayMetrics> rows);
void write_comparison_csv(const std::filesystem::path& path,
                          std::span<const ComparisonRow> rows);

struct PhaseSummary {
  double initial = 0.0;  // days 0-4
  double mid = 0.0;      // days 34-38
  double final = 0.0;    // last 5 days
};
// Mean of `pick(metrics)` over the three phases; windows are clipped to the run.
PhaseSummary phase_summary(std::span<const DayMetrics> metrics, bool utilization);

std::string summary_text(const RunConfig& cfg, std::span<const DayMetrics> metrics,
                         const ComparisonReport& report);

// Model file: the resolved config followed by the serialized forest.
void save_model(const std::filesystem::path& path, const RunConfig& cfg, const QModel& q);
struct LoadedModel {
  RunConfig config;
  QModel model;
};
LoadedModel load_model(const std::filesystem::path& path);

struct CaseArtifacts {
  TrainingResult training;
  ComparisonReport comparison;
};

// Train, evaluate, write every artifact into cfg.out_dir.
CaseArtifacts run_case(const RunConfig& cfg, std::ostream* log = nullptr);

// Greedy rollout of one day for `day_seed`, after one greedy warm-up day from a
// fresh fleet. Throws ConfigError when the model does not fit the config.
std::vector<TraceRecord> replay(const LoadedModel& loaded, std::uint64_t day_seed);

// CLI entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace evfleet
