#pragma once

// End-to-end experiment pipeline: data, one training run per (method, seed)
// cell, IID and OOD evaluation, and the on-disk report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vmr/config.hpp"
#include "vmr/evaluation.hpp"

namespace vmr {

enum class Precision { kSingle, kDouble };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct DataSource {
  /// Synthetic data is regenerated per seed; otherwise the files are loaded
  /// once and shared by every seed.
  std::optional<SyntheticConfig> synthetic = SyntheticConfig{};
  AnnotationFormat format = AnnotationFormat::kCanonicalJson;
  std::filesystem::path train_annotations, val_annotations, test_annotations;
  std::filesystem::path train_features, val_features, test_features;
};

/// One trained (or fitted) predictor. `train` holds the resolved settings;
/// freq_prior ignores them.
struct MethodSpec {
  std::string name;
  bool freq_prior = false;
  TrainConfig train;
};

struct ExperimentConfig {
  DataSource data;
  TrainConfig train;
  /// One OOD round per entry, tagged ood-1, ood-2, ... in this order.
  std::vector<double> ood_rhos = {10.0};
  OodPlacement ood_placement = OodPlacement::kPrepend;
  std::vector<MethodSpec> methods;
  /// Each flag adds a DCM cell with only that flag set.
  std::vector<std::string> ablations;
  std::vector<std::uint64_t> seeds = {0};
  Precision precision = Precision::kSingle;
  std::vector<double> thresholds = kDefaultThresholds;
  bool save_checkpoints = false;

  /// Explicit methods followed by one cell per ablation flag.
  std::vector<MethodSpec> cells() const;
  void validate() const;
};

/// Schema: {"data": {"synthetic": {...}} or {"format", "train", "val",
/// "test", "train_features", "val_features", "test_features"}, "train":
/// {...}, "ood_rhos": [...], "ood_placement": "prepend"|"append",
/// "methods": ["baseline" | "dcm" | "blind" | "freq_prior" |
/// {"name", "base", "train": {...overrides}}], "ablations": [...],
/// "seeds": [...], "precision": "single"|"double", "thresholds": [...],
/// "save_checkpoints": bool}. Omitted fields take defaults; the default
/// method list is baseline and dcm.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct CellResult {
  std::string method;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<MetricsRecord> metrics;  // iid, then one per OOD round
  std::vector<TraceRow> trace;
  int best_epoch = 0;
  std::size_t skipped_negatives = 0;
  std::uint64_t parameter_checksum = 0;
};

struct Aggregate {
  std::string method;
  std::string split_tag;
  std::size_t seeds = 0;
  double miou_mean = 0.0;
  double miou_std = 0.0;
  std::map<double, double> r1_mean;
  std::map<double, double> r1_std;
};

struct ExperimentReport {
  nlohmann::json config;
  std::vector<CellResult> cells;
  std::vector<Aggregate> aggregates;
  /// Training-split annotation heatmaps, one per seed.
  std::vector<std::pair<std::uint64_t, BiasHeatmap>> heatmaps;

  std::size_t failed() const;
  const CellResult* find(const std::string& method, std::uint64_t seed) const;
};

/// Mean and sample standard deviation per (method, split) over successful
/// cells, in first-appearance order.
std::vector<Aggregate> aggregate(const std::vector<CellResult>& cells);

/// Cells run in up to `workers` threads (0 reads VMR_NUM_WORKERS, default
/// 1); the result does not depend on the worker count. A failing cell is
/// recorded and the rest continue. `checkpoint_dir` receives checkpoints
/// when the config asks for them.
ExperimentReport run_experiment(const ExperimentConfig& config, int workers = 0,
                                const std::filesystem::path& checkpoint_dir = {});

/// Everything deterministic: config, cells (with traces) and aggregates.
nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

/// metrics.json, metrics.csv (one row per method, seed and split),
/// trace_<method>_seed<k>.csv, heatmap_seed<k>.{csv,png}, summary.txt and
/// environment.json (the only file with host or time details).
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

std::string summary_table(const ExperimentReport& report);

/// Compiler, build type, host and wall-clock time.
nlohmann::json environment_fingerprint();

}  // namespace vmr
