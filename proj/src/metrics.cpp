#include "pad/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pad {

namespace {

struct SplitScores {
  std::vector<double> attack;   // sorted ascending
  std::vector<double> genuine;  // sorted ascending
};

SplitScores split_and_sort(const std::vector<ScoreRecord>& scores) {
  SplitScores s;
  for (const auto& r : scores) (r.is_attack ? s.attack : s.genuine).push_back(r.attack_prob);
  std::sort(s.attack.begin(), s.attack.end());
  std::sort(s.genuine.begin(), s.genuine.end());
  return s;
}

// attack iff attack_prob >= t, so an attack is missed when attack_prob < t
double apcer_at(const SplitScores& s, double t) {
  const auto below = std::lower_bound(s.attack.begin(), s.attack.end(), t) - s.attack.begin();
  return static_cast<double>(below) / static_cast<double>(s.attack.size());
}

double bpcer_at(const SplitScores& s, double t) {
  const auto below = std::lower_bound(s.genuine.begin(), s.genuine.end(), t) - s.genuine.begin();
  return static_cast<double>(s.genuine.size() - below) / static_cast<double>(s.genuine.size());
}

std::vector<double> distinct_thresholds(const SplitScores& s) {
  std::vector<double> t;
  t.reserve(s.attack.size() + s.genuine.size());
  t.insert(t.end(), s.attack.begin(), s.attack.end());
  t.insert(t.end(), s.genuine.begin(), s.genuine.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

void require_both_classes(const SplitScores& s, const char* what) {
  if (s.attack.empty() || s.genuine.empty())
    throw UndefinedMetricError(std::string(what) + ": needs both attack and genuine records");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double apcer(const std::vector<ScoreRecord>& scores, double threshold) {
  const SplitScores s = split_and_sort(scores);
  if (s.attack.empty()) throw UndefinedMetricError("apcer: no attack records");
  return apcer_at(s, threshold);
}

double bpcer(const std::vector<ScoreRecord>& scores, double threshold) {
  const SplitScores s = split_and_sort(scores);
  if (s.genuine.empty()) throw UndefinedMetricError("bpcer: no genuine records");
  return bpcer_at(s, threshold);
}

EerResult eer(const std::vector<ScoreRecord>& scores) {
  const SplitScores s = split_and_sort(scores);
  require_both_classes(s, "eer");

  std::vector<double> cands = distinct_thresholds(s);
  cands.push_back(cands.back() + 1.0);  // above every score: APCER 1, BPCER 0

  double prev_a = 0.0, prev_b = 0.0, prev_t = 0.0;
  bool have_prev = false;
  for (double t : cands) {
    const double a = apcer_at(s, t);
    const double b = bpcer_at(s, t);
    const double diff = a - b;
    if (diff == 0.0) return {a, t};
    if (diff > 0.0) {
      if (!have_prev) return {a, t};  // cannot happen: diff at the minimum score is -1
      const double denom = (a - prev_a) + (prev_b - b);
      const double frac = (prev_b - prev_a) / denom;
      return {prev_a + frac * (a - prev_a), prev_t + frac * (t - prev_t)};
    }
    prev_a = a;
    prev_b = b;
    prev_t = t;
    have_prev = true;
  }
  throw ContractError("eer: threshold sweep found no crossing");
}

std::vector<RocPoint> roc_points(const std::vector<ScoreRecord>& scores) {
  const SplitScores s = split_and_sort(scores);
  require_both_classes(s, "roc_points");

  const std::vector<double> cands = distinct_thresholds(s);
  std::vector<RocPoint> points;
  points.reserve(cands.size() + 2);
  points.push_back({std::min(0.0, cands.front()) - 1.0, 0.0, 1.0});
  for (double t : cands) points.push_back({t, apcer_at(s, t), bpcer_at(s, t)});
  points.push_back({std::max(1.0, cands.back()) + 1.0, 1.0, 0.0});
  return points;
}

MetricsReport compute_report(const std::vector<ScoreRecord>& scores, double threshold,
                             const std::string& scoring_mode) {
  MetricsReport report;
  report.threshold = threshold;
  report.apcer = apcer(scores, threshold);
  report.bpcer = bpcer(scores, threshold);
  const EerResult e = eer(scores);
  report.eer = e.eer;
  report.eer_threshold = e.threshold;
  report.scoring_mode = scoring_mode;
  report.roc = roc_points(scores);
  std::reverse(report.roc.begin(), report.roc.end());
  return report;
}

void save_scores_csv(const std::vector<ScoreRecord>& scores, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write score file: " + path.string());
  out << "id,subject_id,attack_type,true_label,attack_prob\n";
  for (const auto& r : scores)
    out << r.id << ',' << r.subject_id << ',' << r.attack_code << ','
        << (r.is_attack ? "attack" : "genuine") << ',' << format_double(r.attack_prob) << '\n';
}

std::vector<ScoreRecord> load_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read score file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty score file: " + path.string());
  std::vector<ScoreRecord> scores;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, subject, code, label, prob;
    if (!std::getline(ss, id, ',') || !std::getline(ss, subject, ',') ||
        !std::getline(ss, code, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, prob, ','))
      throw IngestionError("malformed score row: " + line);
    ScoreRecord r;
    r.id = id;
    r.subject_id = std::stoi(subject);
    r.attack_code = std::stoi(code);
    if (label != "attack" && label != "genuine")
      throw IngestionError("unknown label in score row: " + line);
    r.is_attack = label == "attack";
    r.attack_prob = std::stod(prob);
    scores.push_back(std::move(r));
  }
  return scores;
}

void save_report_json(const MetricsReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["apcer"] = report.apcer;
  j["bpcer"] = report.bpcer;
  j["threshold"] = report.threshold;
  j["eer"] = report.eer;
  j["eer_threshold"] = report.eer_threshold;
  j["scoring_mode"] = report.scoring_mode;
  j["roc"] = nlohmann::json::array();
  for (const auto& p : report.roc)
    j["roc"].push_back({{"threshold", p.threshold}, {"apcer", p.apcer}, {"bpcer", p.bpcer}});
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write report: " + path.string());
  out << j.dump(2) << '\n';
}

MetricsReport load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read report: " + path.string());
  nlohmann::json j;
  in >> j;
  MetricsReport report;
  report.apcer = j.at("apcer").get<double>();
  report.bpcer = j.at("bpcer").get<double>();
  report.threshold = j.at("threshold").get<double>();
  report.eer = j.at("eer").get<double>();
  report.eer_threshold = j.at("eer_threshold").get<double>();
  report.scoring_mode = j.at("scoring_mode").get<std::string>();
  for (const auto& p : j.at("roc"))
    report.roc.push_back({p.at("threshold").get<double>(), p.at("apcer").get<double>(),
                          p.at("bpcer").get<double>()});
  return report;
}

}  // namespace pad
