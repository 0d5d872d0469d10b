#ifndef SIMMIA_EVAL_REPORT_HPP
#define SIMMIA_EVAL_REPORT_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace simmia {

using Bits = std::vector<std::uint8_t>;  // 0/1 per target; 1 = member

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1)
  double auc = 0.0;
};

struct ReportMeta {
  std::string attack;
  std::vector<std::uint64_t> seeds;
  std::string config_digest;
};

struct EvalReport {
  double asr = 0.0;
  std::vector<RocPoint> roc;
  double auc = 0.0;
  Confusion confusion;
  ReportMeta meta;
};

double asr(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> truth);

Confusion confusion_counts(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> truth);

// Higher score = more likely member. Equal scores form one step of the curve,
// so the trapezoidal area equals P(member > non-member) + P(tie) / 2 exactly.
RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth);

// Fraction-of-pairs AUC with the same tie convention, computed from the
// integer pair counts; roc_curve(...).auc returns the identical double.
double rank_auc(std::span<const double> member_scores, std::span<const double> nonmember_scores);

struct ThresholdFit {
  double threshold = 0.0;
  double asr = 0.0;
};

// Threshold attack where score <= threshold means member. Candidates are the
// midpoints of consecutive distinct sorted scores plus one point below the
// minimum and one above the maximum; the best training ASR wins and ties go
// to the smaller threshold.
ThresholdFit fit_lower_threshold(std::span<const double> scores, std::span<const std::uint8_t> truth);

// Assembles a report from membership evidence (higher = member) and decisions.
EvalReport make_report(std::span<const double> evidence, std::span<const std::uint8_t> decisions,
                       std::span<const std::uint8_t> truth, ReportMeta meta);

std::string roc_csv(const std::vector<RocPoint>& roc);
std::string report_text(const EvalReport& report);
std::string report_json(const EvalReport& report);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

}  // namespace simmia

#endif  // SIMMIA_EVAL_REPORT_HPP
