#include "pad/protocols.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pad {

namespace {

nlohmann::json alpha_schedule_json(const AlphaSchedule& s) {
  nlohmann::json j = {{"alpha0", s.alpha0}, {"step", s.step}};
  if (s.cap) j["cap"] = *s.cap;
  return j;
}

AlphaSchedule alpha_schedule_from_json(const nlohmann::json& j) {
  AlphaSchedule s;
  s.alpha0 = j.at("alpha0").get<double>();
  s.step = j.at("step").get<double>();
  if (j.contains("cap")) s.cap = j.at("cap").get<double>();
  return s;
}

nlohmann::json train_config_json(const TrainConfig& c) {
  return {{"strategy", to_string(c.strategy)},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"alpha_schedule", alpha_schedule_json(c.alpha_schedule)},
          {"seed", c.seed},
          {"dfs_frames_per_video", c.dfs_frames_per_video}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer = j.value("optimizer", std::string("adam"));
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("alpha_schedule")) c.alpha_schedule = alpha_schedule_from_json(j.at("alpha_schedule"));
  c.seed = j.at("seed").get<uint64_t>();
  c.dfs_frames_per_video = j.value("dfs_frames_per_video", 3);
  return c;
}

nlohmann::json experiment_config_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["strategy"] = to_string(c.strategy);
  j["background"] = to_string(c.background);
  j["protocol"] = to_string(c.protocol);
  j["train_dataset"] = c.train_dataset;
  j["test_dataset"] = c.test_dataset;
  if (c.attack_code) j["attack_code"] = *c.attack_code;
  j["train_config"] = train_config_json(c.train);
  j["model"] = {{"backbone", to_string(c.model.backbone)},
                {"input_size", c.model.input_size},
                {"pretrained", c.model.pretrained},
                {"heads", to_string(c.model.heads)},
                {"n_attack_classes", c.model.n_attack_classes}};
  j["uai"] = {{"dim_e1", c.dim_e1}, {"dim_e2", c.dim_e2}, {"dropout_rate", c.dropout_rate}};
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  c.background = variant_from_string(j.at("background").get<std::string>());
  c.protocol = protocol_from_string(j.at("protocol").get<std::string>());
  c.train_dataset = j.at("train_dataset").get<std::string>();
  c.test_dataset = j.at("test_dataset").get<std::string>();
  if (j.contains("attack_code")) c.attack_code = j.at("attack_code").get<int>();
  c.train = train_config_from_json(j.at("train_config"));
  if (j.contains("model")) {
    const auto& m = j.at("model");
    c.model.backbone = backbone_from_string(m.at("backbone").get<std::string>());
    c.model.input_size = m.at("input_size").get<int>();
    c.model.pretrained = m.value("pretrained", false);
    c.model.heads = heads_from_string(m.at("heads").get<std::string>());
    c.model.n_attack_classes = m.value("n_attack_classes", kNumAttackClasses);
  }
  if (j.contains("uai")) {
    c.dim_e1 = j.at("uai").value("dim_e1", 128);
    c.dim_e2 = j.at("uai").value("dim_e2", 64);
    c.dropout_rate = j.at("uai").value("dropout_rate", 0.5);
  }
  c.output_dir = j.at("output_dir").get<std::string>();
  return c;
}

nlohmann::json metrics_json(const MetricsReport& m) {
  nlohmann::json j;
  j["apcer"] = m.apcer;
  j["bpcer"] = m.bpcer;
  j["threshold"] = m.threshold;
  j["eer"] = m.eer;
  j["eer_threshold"] = m.eer_threshold;
  j["scoring_mode"] = m.scoring_mode;
  j["roc"] = nlohmann::json::array();
  for (const auto& p : m.roc)
    j["roc"].push_back({{"threshold", p.threshold}, {"apcer", p.apcer}, {"bpcer", p.bpcer}});
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.apcer = j.at("apcer").get<double>();
  m.bpcer = j.at("bpcer").get<double>();
  m.threshold = j.at("threshold").get<double>();
  m.eer = j.at("eer").get<double>();
  m.eer_threshold = j.at("eer_threshold").get<double>();
  m.scoring_mode = j.at("scoring_mode").get<std::string>();
  for (const auto& p : j.at("roc"))
    m.roc.push_back({p.at("threshold").get<double>(), p.at("apcer").get<double>(),
                     p.at("bpcer").get<double>()});
  return m;
}

// Resolves head setup and strategy coherence before any compute.
ExperimentConfig resolve(const ExperimentConfig& raw) {
  ExperimentConfig config = raw;
  if (strategy_uses_multiclass(config.strategy))
    config.model.heads = HeadSetup::binary_plus_multiclass;
  config.train.strategy = config.strategy;
  return config;
}

DatasetManifest load_dataset(const std::filesystem::path& data_root, const std::string& dataset,
                             Variant variant) {
  const auto path = manifest_path(data_root, dataset, variant);
  if (!std::filesystem::exists(path))
    throw ConfigError("manifest not found: " + path.string());
  return load_manifest_csv(path, dataset);
}

std::set<int> train_codes_for(const ExperimentConfig& config, const DatasetManifest& manifest) {
  std::set<int> present;
  for (int c : manifest.attack_codes_present)
    if (c != 0) present.insert(c);
  switch (config.protocol) {
    case ProtocolKind::one_attack:
      return {*config.attack_code};
    case ProtocolKind::unseen_attack: {
      present.erase(*config.attack_code);
      return present;
    }
    default:
      return present;
  }
}

struct TrainedModel {
  std::optional<PadModel> classifier;
  std::optional<UaiModel> uai;
};

LossLog train_dispatch(TrainedModel& model, const DatasetManifest& manifest,
                       const TrainConfig& config, const BatchObserver& observer) {
  switch (config.strategy) {
    case Strategy::bc:
    case Strategy::mt:
      return train_classifier(*model.classifier, manifest, config, observer);
    case Strategy::adv_bc:
    case Strategy::adv_mt:
      return train_adversarial(*model.uai, manifest, config, observer);
    case Strategy::dfs:
    case Strategy::mt_dfs:
      return dfs_train(*model.classifier, manifest, config, observer);
    case Strategy::adv_dfs:
      return dfs_train(*model.uai, manifest, config, observer);
  }
  throw ContractError("bad strategy value");
}

}  // namespace

std::string to_string(ProtocolKind p) {
  switch (p) {
    case ProtocolKind::same_dataset: return "same_dataset";
    case ProtocolKind::cross_dataset: return "cross_dataset";
    case ProtocolKind::one_attack: return "one_attack";
    case ProtocolKind::unseen_attack: return "unseen_attack";
  }
  throw ContractError("bad protocol value");
}

ProtocolKind protocol_from_string(const std::string& s) {
  for (ProtocolKind p : {ProtocolKind::same_dataset, ProtocolKind::cross_dataset,
                         ProtocolKind::one_attack, ProtocolKind::unseen_attack})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown protocol: " + s);
}

void validate_experiment_config(const ExperimentConfig& config) {
  const bool needs_code = config.protocol == ProtocolKind::one_attack ||
                          config.protocol == ProtocolKind::unseen_attack;
  if (needs_code && !config.attack_code)
    throw ConfigError("protocol " + to_string(config.protocol) + " requires attack_code");
  if (!needs_code && config.attack_code)
    throw ConfigError("attack_code is only valid for one_attack/unseen_attack");
  if (config.attack_code && (*config.attack_code < 1 || *config.attack_code >= kNumAttackClasses))
    throw ConfigError("attack_code out of range");
  if (config.protocol == ProtocolKind::cross_dataset &&
      config.train_dataset == config.test_dataset)
    throw ConfigError("cross_dataset requires distinct train and test datasets");
  if (config.protocol != ProtocolKind::cross_dataset &&
      config.train_dataset != config.test_dataset)
    throw ConfigError("non-cross protocols require train_dataset == test_dataset");
  if (!is_known_dataset_name(config.train_dataset) || !is_known_dataset_name(config.test_dataset))
    throw ConfigError("unknown dataset name");
  validate_train_config(config.train);
  validate_model_config(config.model);
}

void save_experiment_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write config: " + path.string());
  out << experiment_config_json(config).dump(2) << '\n';
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    return experiment_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config " + path.string() + ": " + e.what());
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& data_root,
                                    const std::string& dataset, Variant variant) {
  return data_root / dataset / ("manifest_" + to_string(variant) + ".csv");
}

ExperimentResult run_experiment(const ExperimentConfig& raw_config,
                                const std::filesystem::path& data_root, const RunHooks& hooks) {
  const ExperimentConfig config = resolve(raw_config);
  validate_experiment_config(config);

  DatasetManifest train_manifest = load_dataset(data_root, config.train_dataset, config.background);
  DatasetManifest test_manifest =
      config.protocol == ProtocolKind::cross_dataset
          ? load_dataset(data_root, config.test_dataset, config.background)
          : train_manifest;

  if (config.protocol == ProtocolKind::one_attack || config.protocol == ProtocolKind::unseen_attack) {
    const std::set<int> train_codes = train_codes_for(config, train_manifest);
    const std::set<int> test_codes = {*config.attack_code};
    train_manifest = filter_attacks(train_manifest, train_codes, test_codes);
    test_manifest = train_manifest;
  }

  const auto run_dir = std::filesystem::path(config.output_dir) / to_string(config.protocol) /
                       to_string(config.strategy) / to_string(config.background) /
                       std::to_string(config.train.seed);
  std::filesystem::create_directories(run_dir);
  save_experiment_config(config, run_dir / "config.json");

  const auto t0 = std::chrono::steady_clock::now();
  const uint32_t seed = static_cast<uint32_t>(config.train.seed);

  TrainedModel model;
  if (strategy_is_adversarial(config.strategy)) {
    UaiConfig uai;
    uai.base = config.model;
    uai.dim_e1 = config.dim_e1;
    uai.dim_e2 = config.dim_e2;
    uai.dropout_rate = config.dropout_rate;
    model.uai = build_uai(uai, seed);
  } else {
    model.classifier = build_classifier(config.model, seed);
  }

  // Cross-dataset runs reuse the matching same-dataset checkpoint when one
  // exists; otherwise the model is trained fresh on the train dataset.
  LossLog log;
  bool reused_checkpoint = false;
  if (config.protocol == ProtocolKind::cross_dataset) {
    const auto same_dir = std::filesystem::path(config.output_dir) / "same_dataset" /
                          to_string(config.strategy) / to_string(config.background) /
                          std::to_string(config.train.seed) / "checkpoint";
    if (std::filesystem::exists(same_dir / "model.json")) {
      if (strategy_is_adversarial(config.strategy))
        model.uai = load_uai_checkpoint(same_dir);
      else
        model.classifier = load_classifier_checkpoint(same_dir);
      reused_checkpoint = true;
    }
  }
  if (!reused_checkpoint) log = train_dispatch(model, train_manifest, config.train, hooks.on_train_batch);

  const ScoringMode mode =
      strategy_is_dfs(config.strategy) ? ScoringMode::per_video_dfs : ScoringMode::per_frame;
  const std::vector<ScoreRecord> scores =
      model.classifier ? score_manifest(*model.classifier, test_manifest, Split::test, mode)
                       : score_manifest(*model.uai, test_manifest, Split::test, mode);

  ExperimentResult result;
  result.config = config;
  result.metrics = compute_report(scores, 0.5, to_string(mode));
  result.run_dir = run_dir.string();
  result.loss_log_path = (run_dir / "losses.csv").string();
  result.checkpoint_path = (run_dir / "checkpoint").string();

  save_loss_log_csv(log, run_dir / "losses.csv");
  save_scores_csv(scores, run_dir / "scores.csv");
  save_report_json(result.metrics, run_dir / "metrics.json");
  if (model.classifier)
    save_checkpoint(run_dir / "checkpoint", *model.classifier);
  else
    save_checkpoint(run_dir / "checkpoint", *model.uai);

  result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::pair<ExperimentResult, ExperimentResult> run_background_comparison(
    const ExperimentConfig& base, const std::filesystem::path& data_root) {
  ExperimentConfig full_config = base;
  full_config.background = Variant::full;
  ExperimentConfig crop_config = base;
  crop_config.background = Variant::crop;
  return {run_experiment(full_config, data_root), run_experiment(crop_config, data_root)};
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string format_report_table(const std::vector<ExperimentResult>& results) {
  if (results.empty()) throw ContractError("format_report_table: no results");
  double best_apcer = results[0].metrics.apcer, best_bpcer = results[0].metrics.bpcer,
         best_eer = results[0].metrics.eer;
  for (const auto& r : results) {
    best_apcer = std::min(best_apcer, r.metrics.apcer);
    best_bpcer = std::min(best_bpcer, r.metrics.bpcer);
    best_eer = std::min(best_eer, r.metrics.eer);
  }
  std::ostringstream out;
  out << "Method      Background  APCER (%)  BPCER (%)  EER (%)\n";
  const auto cell = [](const std::string& value, bool best, int width) {
    std::string s = value + (best ? "*" : "");
    while (static_cast<int>(s.size()) < width) s += ' ';
    return s;
  };
  for (const auto& r : results) {
    std::string method = strategy_display_name(r.config.strategy);
    while (method.size() < 12) method += ' ';
    out << method << cell(r.config.background == Variant::full ? "Yes" : "No", false, 12)
        << cell(format_percent(r.metrics.apcer), r.metrics.apcer == best_apcer, 11)
        << cell(format_percent(r.metrics.bpcer), r.metrics.bpcer == best_bpcer, 11)
        << cell(format_percent(r.metrics.eer), r.metrics.eer == best_eer, 9) << '\n';
  }
  return out.str();
}

void emit_report(const std::vector<ExperimentResult>& results,
                 const std::filesystem::path& json_path,
                 const std::filesystem::path& table_path) {
  if (results.empty()) throw ContractError("emit_report: no results");
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json e;
    e["method"] = strategy_display_name(r.config.strategy);
    e["background"] = r.config.background == Variant::full ? "Yes" : "No";
    e["config"] = experiment_config_json(r.config);
    e["metrics"] = metrics_json(r.metrics);
    e["loss_log_path"] = r.loss_log_path;
    e["checkpoint_path"] = r.checkpoint_path;
    e["run_dir"] = r.run_dir;
    e["wall_time_seconds"] = r.wall_time_seconds;
    j.push_back(e);
  }
  std::ofstream out(json_path);
  if (!out) throw IngestionError("cannot write report: " + json_path.string());
  out << j.dump(2) << '\n';
  std::ofstream table(table_path);
  if (!table) throw IngestionError("cannot write table: " + table_path.string());
  table << format_report_table(results);
}

std::vector<ExperimentResult> load_results_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read results: " + path.string());
  nlohmann::json j;
  in >> j;
  std::vector<ExperimentResult> results;
  for (const auto& e : j) {
    ExperimentResult r;
    r.config = experiment_config_from_json(e.at("config"));
    r.metrics = metrics_from_json(e.at("metrics"));
    r.loss_log_path = e.at("loss_log_path").get<std::string>();
    r.checkpoint_path = e.at("checkpoint_path").get<std::string>();
    r.run_dir = e.at("run_dir").get<std::string>();
    r.wall_time_seconds = e.at("wall_time_seconds").get<double>();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace pad
