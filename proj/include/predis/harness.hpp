#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "predis/detection_server.hpp"
#include "predis/error.hpp"
#include "predis/flow_model.hpp"
#include "predis/knn.hpp"

namespace predis {

enum class HarnessErrc { kBadConfig, kInsufficientData, kLengthMismatch, kPipeline };
using HarnessError = Error<HarnessErrc>;

enum class Mode { kPrivacy, kPlaintext };
enum class TransportMode { kLocal, kTcp };

struct ExperimentConfig {
  // "synth" or one or more comma-separated flow CSV paths (one per domain).
  std::string dataset = "synth";
  Mode mode = Mode::kPrivacy;
  TransportMode transport = TransportMode::kLocal;
  std::size_t k = kDefaultK;
  std::size_t node_budget = kDefaultNodeBudget;
  std::size_t folds = 6;
  std::size_t domains = 1;
  std::uint64_t seed = 1;
  std::uint64_t scale = 1000;
  std::int64_t window_ms = kDefaultWindowMs;
  // Synthetic scenario size per domain.
  std::size_t synth_windows = 240;
  double attack_fraction = 0.5;
  bool require_attack_per_fold = true;
};

/// Parses "key = value" lines; '#' starts a comment. Keys: dataset, mode
/// (privacy|plaintext), transport (local|tcp), k, budget (number or
/// unbounded), folds, domains, seed, scale, window_ms, synth_windows,
/// attack_fraction.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& cfg);

struct WindowTruth {
  ClassLabel label = ClassLabel::kNormal;
  Stage stage = Stage::kNone;
};

/// ATTACK if any flow is ATTACK; stage is the most advanced one present.
WindowTruth window_truth(const FlowWindow& window);

struct StageMetrics {
  Stage stage = Stage::kNone;
  std::size_t windows = 0;
  std::size_t detected = 0;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct ComponentTimes {
  std::chrono::nanoseconds pretreat{0};
  std::chrono::nanoseconds computing{0};
  std::chrono::nanoseconds detection{0};
  std::chrono::nanoseconds total{0};
};

/// Precision and recall are absent when their denominator is zero.
struct MetricsReport {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::array<StageMetrics, 3> stages{};
  ComponentTimes times;
};

MetricsReport compute_metrics(std::span<const ClassLabel> verdicts, std::span<const WindowTruth> truth);

/// TrainingInstance per window: fixed-point features, window-level label.
std::vector<TrainingInstance> training_from_windows(std::span<const FlowWindow> windows, const FixedPointCodec& codec,
                                                    std::uint32_t first_id = 0);

/// Plaintext control arm: extract features, diff in the clear, BBF, vote.
ClassLabel plaintext_classify(const KdTree& tree, const FlowWindow& window, const FixedPointCodec& codec,
                              std::size_t k, std::size_t node_budget);

/// Reference baseline: plaintext features and an exhaustive scan.
ClassLabel linear_scan_classify(std::span<const TrainingInstance> train, const FlowWindow& window,
                                const FixedPointCodec& codec, std::size_t k);

struct PipelineOptions {
  DetectionConfig detection;
  std::uint64_t scale = 1000;
  TransportMode transport = TransportMode::kLocal;
  // Per-domain mask seeds derive from this when set.
  std::optional<std::uint64_t> mask_seed;
  std::chrono::milliseconds verdict_timeout{120000};
};

struct PipelineRun {
  std::vector<Verdict> verdicts;  // sorted by key
  std::vector<Alarm> alarms;      // as surfaced by the agents, sorted by key
  ComponentTimes times;
};

/// Runs agents (one per entry of windows_by_domain, concurrently), a
/// computing server and a detection server over in-memory channels or
/// loopback TCP, and collects every verdict.
PipelineRun run_pipeline(std::span<const TrainingInstance> train,
                         const std::vector<std::vector<FlowWindow>>& windows_by_domain,
                         const PipelineOptions& options);

struct FoldReport {
  std::size_t fold = 0;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  MetricsReport metrics;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<FoldReport> folds;
  std::optional<double> mean_precision;
  std::optional<double> mean_recall;
  std::vector<ClassLabel> verdicts;  // every fold's verdicts, fold-major
};

/// Windowed data for a configuration: one window sequence per domain.
std::vector<std::vector<FlowWindow>> load_experiment_windows(const ExperimentConfig& cfg);

/// Time-ordered k-fold cross validation at window granularity. Folds are
/// contiguous slices of each domain's window sequence.
ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::vector<std::vector<FlowWindow>>& data);

struct ScalingRow {
  std::size_t domains = 0;
  std::size_t windows = 0;
  std::chrono::nanoseconds wall{0};
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  double slope_ms_per_domain = 0;
  double intercept_ms = 0;
  double r_squared = 0;
  // One domain at twice the per-domain load, relative to the 1-domain row.
  std::chrono::nanoseconds doubled_load_wall{0};
  double doubling_ratio = 0;
};

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Wall time of the privacy pipeline for 1..max_domains domains, each
/// streaming windows_per_domain windows. Repetitions run round-robin
/// over all points and each point keeps its fastest run.
ScalingReport run_scaling(const ExperimentConfig& cfg, std::size_t max_domains, std::size_t windows_per_domain,
                          std::size_t repetitions = 3);

void print_report(std::ostream& out, const ExperimentReport& report);
void write_report_jsonl(std::ostream& out, const ExperimentReport& report);
void print_scaling(std::ostream& out, const ScalingReport& report);
void write_scaling_jsonl(std::ostream& out, const ScalingReport& report);

}  // namespace predis
