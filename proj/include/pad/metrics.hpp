#ifndef PAD_METRICS_HPP_
#define PAD_METRICS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "pad/error.hpp"

namespace pad {

// One scored presentation. The decision rule everywhere is: attack iff
// attack_prob >= threshold (ties count as attack).
struct ScoreRecord {
  std::string id;
  double attack_prob = 0.0;
  bool is_attack = false;  // ground truth
  int attack_code = 0;
  int subject_id = 0;
};

struct RocPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct MetricsReport {
  double apcer = 0.0;
  double bpcer = 0.0;
  double threshold = 0.5;
  double eer = 0.0;
  double eer_threshold = 0.0;
  std::string scoring_mode = "per_frame";
  std::vector<RocPoint> roc;  // ordered by strictly decreasing threshold
};

// Fraction of attack records accepted as bona fide (attack_prob < threshold).
double apcer(const std::vector<ScoreRecord>& scores, double threshold);

// Fraction of bona fide records flagged as attacks (attack_prob >= threshold).
double bpcer(const std::vector<ScoreRecord>& scores, double threshold);

// Equal error rate. Sweeps every distinct score as a candidate threshold; if
// APCER - BPCER has no exact zero, interpolates linearly between the two
// adjacent candidates bracketing the sign change.
EerResult eer(const std::vector<ScoreRecord>& scores);

// One point per distinct score plus the two degenerate endpoints (thresholds
// just below 0 and just above 1), ordered by increasing threshold.
std::vector<RocPoint> roc_points(const std::vector<ScoreRecord>& scores);

MetricsReport compute_report(const std::vector<ScoreRecord>& scores, double threshold = 0.5,
                             const std::string& scoring_mode = "per_frame");

// Score CSV: id,subject_id,attack_type,true_label,attack_prob
void save_scores_csv(const std::vector<ScoreRecord>& scores, const std::filesystem::path& path);
std::vector<ScoreRecord> load_scores_csv(const std::filesystem::path& path);

void save_report_json(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport load_report_json(const std::filesystem::path& path);

}  // namespace pad

#endif  // PAD_METRICS_HPP_
