#ifndef PAD_PROTOCOLS_HPP_
#define PAD_PROTOCOLS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pad/metrics.hpp"
#include "pad/model.hpp"
#include "pad/training.hpp"

namespace pad {

enum class ProtocolKind { same_dataset, cross_dataset, one_attack, unseen_attack };

std::string to_string(ProtocolKind p);
ProtocolKind protocol_from_string(const std::string& s);

// The reproducibility unit: everything needed to rerun an experiment.
struct ExperimentConfig {
  Strategy strategy = Strategy::bc;
  Variant background = Variant::full;
  ProtocolKind protocol = ProtocolKind::same_dataset;
  std::string train_dataset = "synthetic";
  std::string test_dataset = "synthetic";
  std::optional<int> attack_code;  // required for one_attack / unseen_attack
  TrainConfig train;
  ModelConfig model;
  int dim_e1 = 128;          // adversarial strategies only
  int dim_e2 = 64;
  double dropout_rate = 0.5;
  std::string output_dir = "runs";
};

void validate_experiment_config(const ExperimentConfig& config);
void save_experiment_config(const ExperimentConfig& config, const std::filesystem::path& path);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentResult {
  ExperimentConfig config;
  MetricsReport metrics;
  std::string loss_log_path;
  std::string checkpoint_path;
  std::string run_dir;
  double wall_time_seconds = 0.0;
};

struct RunHooks {
  BatchObserver on_train_batch;
};

// Expected data layout: <data_root>/<dataset>/manifest_<variant>.csv plus the
// image tree written by `padlab synth` / `padlab prepare`.
std::filesystem::path manifest_path(const std::filesystem::path& data_root,
                                    const std::string& dataset, Variant variant);

// Trains (or reuses a same_dataset checkpoint for cross_dataset runs), scores
// the test split and writes config.json, losses.csv, scores.csv, metrics.json
// and checkpoint/ under <output_dir>/<protocol>/<strategy>/<variant>/<seed>/.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& data_root,
                                const RunHooks& hooks = {});

// Same config run twice, differing only in the background variant. Both runs
// share the seed.
std::pair<ExperimentResult, ExperimentResult> run_background_comparison(
    const ExperimentConfig& base, const std::filesystem::path& data_root);

// Machine-readable JSON plus a percent table (2 decimals, best-per-column
// flagged) in the paper-table layout: method, background, APCER, BPCER, EER.
void emit_report(const std::vector<ExperimentResult>& results,
                 const std::filesystem::path& json_path,
                 const std::filesystem::path& table_path);
std::string format_report_table(const std::vector<ExperimentResult>& results);
std::vector<ExperimentResult> load_results_json(const std::filesystem::path& path);

// 0.0024 -> "0.24"
std::string format_percent(double fraction);

}  // namespace pad

#endif  // PAD_PROTOCOLS_HPP_
