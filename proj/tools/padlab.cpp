#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "pad/batch.hpp"
#include "pad/explain.hpp"
#include "pad/manifest.hpp"
#include "pad/metrics.hpp"
#include "pad/model.hpp"
#include "pad/protocols.hpp"
#include "pad/synthetic.hpp"
#include "pad/training.hpp"
#include "pad/video.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::set<int> parse_code_set(const std::string& csv) {
  std::set<int> codes;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) codes.insert(std::stoi(tok));
  return codes;
}

void log_resolved(const std::string& command, const json& config) {
  std::cout << "[padlab] " << command << " config: " << config.dump() << "\n";
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string output;
  pad::SyntheticConfig config;
  std::string cue_classes = "3,4";
  std::string attack_codes = "1,2,3,4,5,6,7";
};

int cmd_synth(const SynthArgs& args) {
  pad::SyntheticConfig config = args.config;
  config.background_cue_classes = parse_code_set(args.cue_classes);
  config.attack_codes = parse_code_set(args.attack_codes);
  pad::validate_synthetic_config(config);
  log_resolved("synth", {{"output", args.output},
                         {"n_subjects", config.n_subjects},
                         {"videos_per_subject", config.videos_per_subject},
                         {"frames_per_video", config.frames_per_video},
                         {"image_size", config.image_size},
                         {"cue_strength", config.cue_strength},
                         {"background_cue_classes", args.cue_classes},
                         {"attack_codes", args.attack_codes},
                         {"seed", config.seed}});
  const auto [full, crop] = pad::generate_synthetic(config, args.output);
  std::cout << "[padlab] wrote " << full.records.size() << " full + " << crop.records.size()
            << " crop records under " << args.output << "\n";
  return 0;
}

// -------------------------------------------------------------- prepare ----

struct PrepareArgs {
  std::string input;
  std::string output;
  std::string variant = "both";
  int stride = 10;
  std::string dataset = "rose_youtu";
  std::string label_map;
  double detector_fraction = 0.5;
};

std::optional<int> attack_code_from_name(const std::string& stem,
                                         const std::map<std::string, int>& label_map) {
  const auto it = label_map.find(stem);
  if (it != label_map.end()) return it->second;
  // ROSE-Youtu style prefixes: G, Ps, Pq, Vl, Vm, Mc, Mf, Mu
  static const std::map<std::string, int> kPrefixes = {{"G", 0},  {"Ps", 1}, {"Pq", 2},
                                                       {"Vl", 3}, {"Vm", 4}, {"Mc", 5},
                                                       {"Mf", 6}, {"Mu", 7}};
  const auto us = stem.find('_');
  const auto pit = kPrefixes.find(stem.substr(0, us));
  if (pit != kPrefixes.end()) return pit->second;
  return std::nullopt;
}

std::map<std::string, int> load_label_map(const std::string& path) {
  std::map<std::string, int> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw pad::ConfigError("cannot read label map: " + path);
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
  }
  return out;
}

int cmd_prepare(const PrepareArgs& args) {
  if (!fs::is_directory(args.input))
    throw pad::ConfigError("input is not a readable directory: " + args.input);
  if (!pad::is_known_dataset_name(args.dataset))
    throw pad::ConfigError("unknown dataset name: " + args.dataset);
  const bool want_full = args.variant == "both" || args.variant == "full";
  const bool want_crop = args.variant == "both" || args.variant == "crop";
  if (!want_full && !want_crop) throw pad::ConfigError("variant must be full, crop or both");
  log_resolved("prepare", {{"input", args.input},
                           {"output", args.output},
                           {"variant", args.variant},
                           {"stride", args.stride},
                           {"dataset", args.dataset}});

  const auto label_map = load_label_map(args.label_map);
  const pad::CenterBoxDetector detector(args.detector_fraction);
  pad::DatasetManifest full, crop;
  full.name = crop.name = args.dataset;

  // layout: <input>[/train|/test]/<subject>/<video>
  std::vector<std::pair<fs::path, std::optional<pad::Split>>> roots;
  if (fs::is_directory(fs::path(args.input) / "train") ||
      fs::is_directory(fs::path(args.input) / "test")) {
    if (fs::is_directory(fs::path(args.input) / "train"))
      roots.push_back({fs::path(args.input) / "train", pad::Split::train});
    if (fs::is_directory(fs::path(args.input) / "test"))
      roots.push_back({fs::path(args.input) / "test", pad::Split::test});
  } else {
    roots.push_back({args.input, std::nullopt});
  }

  for (const auto& [root, fixed_split] : roots) {
    std::vector<fs::path> subject_dirs;
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory()) subject_dirs.push_back(entry.path());
    std::sort(subject_dirs.begin(), subject_dirs.end());
    for (const auto& subject_dir : subject_dirs) {
      int subject_id = 0;
      try {
        subject_id = std::stoi(subject_dir.filename().string());
      } catch (const std::exception&) {
        std::cerr << "[padlab] warning: skipping non-numeric subject dir " << subject_dir << "\n";
        continue;
      }
      std::vector<fs::path> videos;
      for (const auto& entry : fs::directory_iterator(subject_dir)) videos.push_back(entry.path());
      std::sort(videos.begin(), videos.end());
      for (const auto& video : videos) {
        const std::string video_id = video.stem().string();
        const auto code = attack_code_from_name(video_id, label_map);
        if (!code)
          throw pad::IngestionError("cannot infer attack type for " + video.string() +
                                    "; provide --label-map");
        pad::for_each_frame(video.string(), args.stride, [&](const pad::ExtractedFrame& frame) {
          const auto store = [&](pad::Variant variant, const cv::Mat& img) {
            const auto dir = fs::path(args.output) / pad::to_string(variant) /
                             std::to_string(subject_id) / video_id;
            fs::create_directories(dir);
            const auto path = dir / (std::to_string(frame.frame_index) + ".png");
            if (!fs::exists(path) && !cv::imwrite(path.string(), img))
              throw pad::IngestionError("failed to write " + path.string());
            pad::SampleRecord r;
            r.image_ref = path.string();
            r.subject_id = subject_id;
            r.video_id = video_id;
            r.frame_index = frame.frame_index;
            r.attack_code = *code;
            r.is_attack = *code != 0;
            r.variant = variant;
            r.split = fixed_split.value_or(pad::Split::train);
            (variant == pad::Variant::full ? full : crop).records.push_back(std::move(r));
          };
          if (want_full) store(pad::Variant::full, frame.image);
          if (want_crop) {
            try {
              store(pad::Variant::crop, pad::crop_face(frame.image, detector));
            } catch (const pad::NoFaceError&) {
              std::cerr << "[padlab] warning: no face in " << video_id << " frame "
                        << frame.frame_index << ", skipped\n";
            }
          }
        });
      }
    }
  }

  for (pad::DatasetManifest* m : {&full, &crop}) {
    if (m->records.empty()) continue;
    if (args.dataset == "rose_youtu") *m = pad::rose_youtu_split(std::move(*m));
    pad::rebuild_codes_present(m);
  }
  fs::create_directories(args.output);
  if (want_full)
    pad::save_manifest_csv(full, fs::path(args.output) / "manifest_full.csv");
  if (want_crop)
    pad::save_manifest_csv(crop, fs::path(args.output) / "manifest_crop.csv");
  std::cout << "[padlab] prepared " << full.records.size() << " full / " << crop.records.size()
            << " crop records\n";
  return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
  std::string data;
  std::string dataset = "synthetic";
  std::string variant = "full";
  std::string out = "run";
  std::string strategy = "bc";
  std::string backbone = "toy_cnn";
  int input_size = 64;
  pad::TrainConfig train;
  int dim_e1 = 128;
  int dim_e2 = 64;
  double dropout_rate = 0.5;
  double alpha_cap = -1.0;
};

int cmd_train(const TrainArgs& args) {
  pad::TrainConfig config = args.train;
  config.strategy = pad::strategy_from_string(args.strategy);
  if (args.alpha_cap >= 0.0) config.alpha_schedule.cap = args.alpha_cap;
  pad::validate_train_config(config);

  pad::ModelConfig model_config;
  model_config.backbone = pad::backbone_from_string(args.backbone);
  model_config.input_size = args.input_size;
  model_config.heads = pad::strategy_uses_multiclass(config.strategy)
                           ? pad::HeadSetup::binary_plus_multiclass
                           : pad::HeadSetup::binary_only;

  const auto manifest_file =
      pad::manifest_path(args.data, args.dataset, pad::variant_from_string(args.variant));
  if (!fs::exists(manifest_file))
    throw pad::ConfigError("manifest not found: " + manifest_file.string());
  const pad::DatasetManifest manifest = pad::load_manifest_csv(manifest_file, args.dataset);

  log_resolved("train", {{"data", args.data},
                         {"dataset", args.dataset},
                         {"variant", args.variant},
                         {"strategy", args.strategy},
                         {"backbone", args.backbone},
                         {"input_size", args.input_size},
                         {"epochs", config.epochs},
                         {"batch_size", config.batch_size},
                         {"learning_rate", config.learning_rate},
                         {"seed", config.seed},
                         {"out", args.out}});

  fs::create_directories(args.out);
  const uint32_t seed = static_cast<uint32_t>(config.seed);
  pad::LossLog log;
  if (pad::strategy_is_adversarial(config.strategy)) {
    pad::UaiConfig uai;
    uai.base = model_config;
    uai.dim_e1 = args.dim_e1;
    uai.dim_e2 = args.dim_e2;
    uai.dropout_rate = args.dropout_rate;
    pad::UaiModel model = pad::build_uai(uai, seed);
    log = config.strategy == pad::Strategy::adv_dfs
              ? pad::dfs_train(model, manifest, config)
              : pad::train_adversarial(model, manifest, config);
    pad::save_checkpoint(fs::path(args.out) / "checkpoint", model);
  } else {
    pad::PadModel model = pad::build_classifier(model_config, seed);
    log = pad::strategy_is_dfs(config.strategy) ? pad::dfs_train(model, manifest, config)
                                                : pad::train_classifier(model, manifest, config);
    pad::save_checkpoint(fs::path(args.out) / "checkpoint", model);
  }
  pad::save_loss_log_csv(log, fs::path(args.out) / "losses.csv");
  if (!log.empty())
    std::cout << "[padlab] final epoch loss: " << log.back().loss << "\n";
  std::cout << "[padlab] checkpoint written to " << (fs::path(args.out) / "checkpoint") << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string scores;
  std::string checkpoint;
  std::string data;
  std::string dataset = "synthetic";
  std::string variant = "full";
  std::string split = "test";
  std::string mode = "per_frame";
  std::string out;
  double threshold = 0.5;
};

void print_metrics(const pad::MetricsReport& report) {
  std::cout << "APCER@" << report.threshold << ": " << pad::format_percent(report.apcer) << "%\n"
            << "BPCER@" << report.threshold << ": " << pad::format_percent(report.bpcer) << "%\n"
            << "EER: " << pad::format_percent(report.eer) << "% (threshold "
            << report.eer_threshold << ")\n";
}

int cmd_eval(const EvalArgs& args) {
  log_resolved("eval", {{"scores", args.scores},
                        {"checkpoint", args.checkpoint},
                        {"data", args.data},
                        {"dataset", args.dataset},
                        {"variant", args.variant},
                        {"split", args.split},
                        {"mode", args.mode},
                        {"threshold", args.threshold},
                        {"out", args.out}});
  std::vector<pad::ScoreRecord> scores;
  if (!args.scores.empty()) {
    scores = pad::load_scores_csv(args.scores);
    const pad::MetricsReport report =
        pad::compute_report(scores, args.threshold, args.mode);
    print_metrics(report);
    if (!args.out.empty()) {
      fs::create_directories(args.out);
      pad::save_report_json(report, fs::path(args.out) / "metrics.json");
    }
    return 0;
  }
  if (args.checkpoint.empty() || args.data.empty())
    throw pad::ConfigError("eval needs either --scores or --checkpoint with --data");

  const auto manifest_file =
      pad::manifest_path(args.data, args.dataset, pad::variant_from_string(args.variant));
  if (!fs::exists(manifest_file))
    throw pad::ConfigError("manifest not found: " + manifest_file.string());
  const pad::DatasetManifest manifest = pad::load_manifest_csv(manifest_file, args.dataset);
  const pad::Split split = pad::split_from_string(args.split);
  const pad::ScoringMode mode = pad::scoring_mode_from_string(args.mode);

  if (pad::checkpoint_kind(args.checkpoint) == pad::CheckpointKind::classifier) {
    pad::PadModel model = pad::load_classifier_checkpoint(args.checkpoint);
    scores = pad::score_manifest(model, manifest, split, mode);
  } else {
    pad::UaiModel model = pad::load_uai_checkpoint(args.checkpoint);
    scores = pad::score_manifest(model, manifest, split, mode);
  }
  const pad::MetricsReport report = pad::compute_report(scores, args.threshold, args.mode);
  print_metrics(report);
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    pad::save_scores_csv(scores, fs::path(args.out) / "scores.csv");
    pad::save_report_json(report, fs::path(args.out) / "metrics.json");
  }
  return 0;
}

// -------------------------------------------------------------- explain ----

struct ExplainArgs {
  std::string checkpoint;
  std::string image;
  int target_class = pad::kBinaryAttackIndex;
  std::string layer;
  double opacity = 0.45;
  std::string out = "explanation";
  bool use_multiclass = false;
};

int cmd_explain(const ExplainArgs& args) {
  log_resolved("explain", {{"checkpoint", args.checkpoint},
                           {"image", args.image},
                           {"target_class", args.target_class},
                           {"layer", args.layer},
                           {"opacity", args.opacity},
                           {"out", args.out},
                           {"multiclass_head", args.use_multiclass}});
  cv::Mat img = cv::imread(args.image, cv::IMREAD_COLOR);
  if (img.empty()) throw pad::IngestionError("cannot decode image: " + args.image);

  pad::Heatmap heatmap;
  double prob = 0.0;
  int input_size = 0;
  if (pad::checkpoint_kind(args.checkpoint) == pad::CheckpointKind::classifier) {
    pad::PadModel model = pad::load_classifier_checkpoint(args.checkpoint);
    input_size = model.config().input_size;
    cv::resize(img, img, cv::Size(input_size, input_size), 0, 0, cv::INTER_LINEAR);
    pad::Tensor image({1, 3, input_size, input_size});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < input_size; ++y)
        for (int x = 0; x < input_size; ++x)
          image.at(0, c, y, x) = img.at<cv::Vec3b>(y, x)[c] / 255.0f;
    const std::string layer = args.layer.empty() ? model.default_cam_layer() : args.layer;
    heatmap = pad::gradcam_pp(model, image, args.target_class, layer, args.use_multiclass);
    prob = model.attack_probs(image)[0];
  } else {
    pad::UaiModel model = pad::load_uai_checkpoint(args.checkpoint);
    input_size = model.config().base.input_size;
    cv::resize(img, img, cv::Size(input_size, input_size), 0, 0, cv::INTER_LINEAR);
    pad::Tensor image({1, 3, input_size, input_size});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < input_size; ++y)
        for (int x = 0; x < input_size; ++x)
          image.at(0, c, y, x) = img.at<cv::Vec3b>(y, x)[c] / 255.0f;
    const std::string layer = args.layer.empty() ? model.default_cam_layer() : args.layer;
    heatmap = pad::gradcam_pp(model, image, args.target_class, layer, args.use_multiclass);
    prob = model.attack_probs(image)[0];
  }
  const cv::Mat blended = pad::overlay(heatmap, img, args.opacity);
  pad::write_explanation(args.out, blended, heatmap, prob);
  std::cout << "[padlab] wrote " << args.out << ".png (predicted attack prob " << prob << ")\n";
  return 0;
}

// ------------------------------------------------------------- protocol ----

struct ProtocolArgs {
  std::vector<std::string> configs;
  std::string data;
  std::string report_dir;
  bool compare_background = false;
  int jobs = 1;
};

int run_child_processes(const std::vector<std::vector<std::string>>& commands, int jobs) {
  size_t next = 0;
  int active = 0;
  int failures = 0;
  std::map<pid_t, size_t> running;
  while (next < commands.size() || active > 0) {
    while (next < commands.size() && active < jobs) {
      std::vector<char*> argv;
      for (const auto& a : commands[next]) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      const pid_t pid = fork();
      if (pid < 0) throw pad::Error("fork failed");
      if (pid == 0) {
        execv("/proc/self/exe", argv.data());
        _exit(127);
      }
      running[pid] = next++;
      ++active;
    }
    int status = 0;
    const pid_t done = wait(&status);
    if (done > 0) {
      --active;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        std::cerr << "[padlab] child for config " << commands[running[done]][2] << " failed\n";
        ++failures;
      }
    }
  }
  return failures;
}

int cmd_protocol(const ProtocolArgs& args) {
  if (args.configs.empty()) throw pad::ConfigError("protocol: at least one --config required");

  // several configs: isolate each run in its own child process
  if (args.configs.size() > 1) {
    std::vector<std::vector<std::string>> commands;
    for (const auto& cfg : args.configs) {
      std::vector<std::string> cmd = {"padlab", "protocol", "--config", cfg, "--data", args.data};
      if (args.compare_background) cmd.push_back("--compare-background");
      commands.push_back(std::move(cmd));
    }
    const int failures = run_child_processes(commands, std::max(1, args.jobs));
    if (failures > 0) throw pad::Error(std::to_string(failures) + " runs failed");
    if (!args.report_dir.empty()) {
      std::vector<pad::ExperimentResult> all;
      for (const auto& cfg : args.configs) {
        const pad::ExperimentConfig config = pad::load_experiment_config(cfg);
        for (const auto& r : pad::load_results_json(
                 fs::path(config.output_dir) /
                 ("results_" + pad::to_string(config.strategy) + "_" +
                  pad::to_string(config.background) + "_" + std::to_string(config.train.seed) +
                  ".json")))
          all.push_back(r);
      }
      fs::create_directories(args.report_dir);
      pad::emit_report(all, fs::path(args.report_dir) / "report.json",
                       fs::path(args.report_dir) / "report.txt");
      std::cout << pad::format_report_table(all);
    }
    return 0;
  }

  const pad::ExperimentConfig config = pad::load_experiment_config(args.configs.front());
  log_resolved("protocol", json::parse(std::ifstream(args.configs.front())));
  std::vector<pad::ExperimentResult> results;
  try {
    if (args.compare_background) {
      auto [full, crop] = pad::run_background_comparison(config, args.data);
      results.push_back(std::move(full));
      results.push_back(std::move(crop));
    } else {
      results.push_back(pad::run_experiment(config, args.data));
    }
  } catch (const std::exception& e) {
    fs::create_directories(config.output_dir);
    std::ofstream err(fs::path(config.output_dir) / "error.json");
    err << json{{"error", e.what()}, {"config", args.configs.front()}}.dump(2) << '\n';
    throw;
  }
  const std::string results_stem = "results_" + pad::to_string(config.strategy) + "_" +
                                   pad::to_string(config.background) + "_" +
                                   std::to_string(config.train.seed);
  const auto results_path = fs::path(config.output_dir) / (results_stem + ".json");
  const auto table_path = fs::path(config.output_dir) / (results_stem + ".txt");
  pad::emit_report(results, results_path, table_path);
  if (!args.report_dir.empty()) {
    fs::create_directories(args.report_dir);
    pad::emit_report(results, fs::path(args.report_dir) / "report.json",
                     fs::path(args.report_dir) / "report.txt");
  }
  std::cout << pad::format_report_table(results);
  return 0;
}

// ------------------------------------------------------------- plot-roc ----

struct PlotRocArgs {
  std::string scores;
  std::string out = "roc.png";
  int width = 900;
  int height = 700;
};

int cmd_plot_roc(const PlotRocArgs& args) {
  log_resolved("plot-roc", {{"scores", args.scores}, {"out", args.out}});
  const auto scores = pad::load_scores_csv(args.scores);
  auto points = pad::roc_points(scores);

  const int margin = 80;
  const double x_min_exp = -4.0;  // BPCER from 1e-4 to 1, log scale
  cv::Mat canvas(args.height, args.width, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto map_x = [&](double bpcer) {
    const double e = std::log10(std::max(bpcer, 1e-4));
    return margin + static_cast<int>((e - x_min_exp) / (0.0 - x_min_exp) *
                                     (args.width - 2 * margin));
  };
  const auto map_y = [&](double tpr) {
    return args.height - margin - static_cast<int>(tpr * (args.height - 2 * margin));
  };

  for (int e = 0; e >= -4; --e) {
    const int x = map_x(std::pow(10.0, e));
    cv::line(canvas, {x, margin}, {x, args.height - margin}, cv::Scalar(220, 220, 220), 1);
    char label[16];
    std::snprintf(label, sizeof(label), "1e%d", e);
    cv::putText(canvas, label, {x - 18, args.height - margin + 25}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(60, 60, 60), 1);
  }
  for (int i = 0; i <= 5; ++i) {
    const double tpr = i / 5.0;
    const int y = map_y(tpr);
    cv::line(canvas, {margin, y}, {args.width - margin, y}, cv::Scalar(220, 220, 220), 1);
    char label[16];
    std::snprintf(label, sizeof(label), "%.1f", tpr);
    cv::putText(canvas, label, {margin - 45, y + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(60, 60, 60), 1);
  }
  cv::rectangle(canvas, {margin, margin},
                {args.width - margin, args.height - margin}, cv::Scalar(0, 0, 0), 1);
  cv::putText(canvas, "BPCER (log scale)", {args.width / 2 - 80, args.height - 25},
              cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0), 1);
  cv::putText(canvas, "1 - APCER", {15, margin - 20}, cv::FONT_HERSHEY_SIMPLEX, 0.6,
              cv::Scalar(0, 0, 0), 1);

  // descending thresholds: BPCER sweeps 0 -> 1
  std::sort(points.begin(), points.end(),
            [](const pad::RocPoint& a, const pad::RocPoint& b) { return a.threshold > b.threshold; });
  std::vector<cv::Point> poly;
  for (const auto& p : points) poly.emplace_back(map_x(p.bpcer), map_y(1.0 - p.apcer));
  for (size_t i = 1; i < poly.size(); ++i)
    cv::line(canvas, poly[i - 1], poly[i], cv::Scalar(180, 80, 20), 2);

  if (!cv::imwrite(args.out, canvas)) throw pad::IngestionError("failed to write " + args.out);
  std::cout << "[padlab] wrote " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"padlab - face presentation-attack-detection experiment toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic dataset");
  synth_cmd->add_option("--output", synth.output, "Dataset directory to create")->required();
  synth_cmd->add_option("--subjects", synth.config.n_subjects, "Number of subjects");
  synth_cmd->add_option("--videos", synth.config.videos_per_subject, "Videos per subject");
  synth_cmd->add_option("--frames", synth.config.frames_per_video, "Frames per video (>= 3)");
  synth_cmd->add_option("--size", synth.config.image_size, "Full-frame image size");
  synth_cmd->add_option("--cue-strength", synth.config.cue_strength, "Artifact strength in [0,1]");
  synth_cmd->add_option("--background-cue-classes", synth.cue_classes,
                        "Codes whose artifact is background-only (csv)");
  synth_cmd->add_option("--attack-codes", synth.attack_codes, "Attack codes to render (csv)");
  synth_cmd->add_option("--seed", synth.config.seed, "Generator seed");

  PrepareArgs prepare;
  auto* prepare_cmd = app.add_subcommand("prepare", "Extract frames and crops from raw videos");
  prepare_cmd->add_option("--input", prepare.input, "Directory of <subject>/<video> inputs")
      ->required();
  prepare_cmd->add_option("--output", prepare.output, "Dataset directory to create")->required();
  prepare_cmd->add_option("--variant", prepare.variant, "full, crop or both");
  prepare_cmd->add_option("--stride", prepare.stride, "Keep every n-th frame");
  prepare_cmd->add_option("--dataset-name", prepare.dataset, "rose_youtu, nuaa, replay_attack");
  prepare_cmd->add_option("--label-map", prepare.label_map, "CSV of video_id,attack_code");
  prepare_cmd->add_option("--detector-fraction", prepare.detector_fraction,
                          "Center-box detector side fraction");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one strategy on one dataset variant");
  train_cmd->add_option("--data", train.data, "Data root")->required();
  train_cmd->add_option("--dataset", train.dataset, "Dataset name");
  train_cmd->add_option("--variant", train.variant, "full or crop (background yes/no)");
  train_cmd->add_option("--strategy", train.strategy, "bc|mt|adv_bc|adv_mt|dfs|mt_dfs|adv_dfs");
  train_cmd->add_option("--backbone", train.backbone, "toy_cnn or paper_default");
  train_cmd->add_option("--input-size", train.input_size, "Model input resolution");
  train_cmd->add_option("--epochs", train.train.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", train.train.batch_size, "Batch size");
  train_cmd->add_option("--lr", train.train.learning_rate, "Learning rate");
  train_cmd->add_option("--seed", train.train.seed, "Seed");
  train_cmd->add_option("--alpha0", train.train.alpha_schedule.alpha0, "Initial alpha");
  train_cmd->add_option("--alpha-step", train.train.alpha_schedule.step, "Alpha step per epoch");
  train_cmd->add_option("--alpha-cap", train.alpha_cap, "Optional alpha cap (< 0 disables)");
  train_cmd->add_option("--dim-e1", train.dim_e1, "Predictive embedding size");
  train_cmd->add_option("--dim-e2", train.dim_e2, "Nuisance embedding size");
  train_cmd->add_option("--dropout", train.dropout_rate, "Dropout rate on e1");
  train_cmd->add_option("--out", train.out, "Output directory");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a split or evaluate a score file");
  eval_cmd->add_option("--scores", eval.scores, "Existing score CSV to evaluate");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint directory to score with");
  eval_cmd->add_option("--data", eval.data, "Data root");
  eval_cmd->add_option("--dataset", eval.dataset, "Dataset name");
  eval_cmd->add_option("--variant", eval.variant, "full or crop");
  eval_cmd->add_option("--split", eval.split, "train or test");
  eval_cmd->add_option("--mode", eval.mode, "per_frame or per_video_dfs");
  eval_cmd->add_option("--threshold", eval.threshold, "Decision threshold");
  eval_cmd->add_option("--out", eval.out, "Directory for scores.csv / metrics.json");

  ExplainArgs explain;
  auto* explain_cmd = app.add_subcommand("explain", "Write a Grad-CAM++ overlay for one image");
  explain_cmd->add_option("--checkpoint", explain.checkpoint, "Checkpoint directory")->required();
  explain_cmd->add_option("--image", explain.image, "Input image")->required();
  explain_cmd->add_option("--target-class", explain.target_class, "Class index (default attack)");
  explain_cmd->add_option("--layer", explain.layer, "Conv layer (default: last)");
  explain_cmd->add_option("--opacity", explain.opacity, "Overlay opacity in (0,1)");
  explain_cmd->add_option("--out", explain.out, "Output stem (<stem>.png, <stem>.json)");
  explain_cmd->add_flag("--multiclass-head", explain.use_multiclass,
                        "Explain the multiclass head instead of the binary one");

  ProtocolArgs protocol;
  auto* protocol_cmd = app.add_subcommand("protocol", "Run experiment configs end to end");
  protocol_cmd->add_option("--config", protocol.configs, "Experiment config JSON (repeatable)")
      ->required();
  protocol_cmd->add_option("--data", protocol.data, "Data root")->required();
  protocol_cmd->add_option("--report", protocol.report_dir, "Aggregate report directory");
  protocol_cmd->add_flag("--compare-background", protocol.compare_background,
                         "Run the config for both variants and pair the rows");
  protocol_cmd->add_option("--jobs", protocol.jobs, "Parallel child processes");

  PlotRocArgs plot;
  auto* plot_cmd = app.add_subcommand("plot-roc", "Render a ROC curve with log-scale x axis");
  plot_cmd->add_option("--scores", plot.scores, "Score CSV")->required();
  plot_cmd->add_option("--out", plot.out, "Output PNG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*prepare_cmd) return cmd_prepare(prepare);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*explain_cmd) return cmd_explain(explain);
    if (*protocol_cmd) return cmd_protocol(protocol);
    if (*plot_cmd) return cmd_plot_roc(plot);
  } catch (const pad::ConfigError& e) {
    std::cerr << "[padlab] config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "[padlab] error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
