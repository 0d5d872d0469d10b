#include "simmia/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "simmia/errors.hpp"

namespace simmia {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ArgumentError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                        std::to_string(b) + ")");
  }
  if (a == 0) throw ArgumentError(std::string(what) + ": empty input");
}

std::string fmt(const char* pattern, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), pattern, value);
  return buffer;
}

}  // namespace

double asr(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> truth) {
  check_lengths(decisions.size(), truth.size(), "asr");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += ((decisions[i] != 0) == (truth[i] != 0));
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

Confusion confusion_counts(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> truth) {
  check_lengths(decisions.size(), truth.size(), "confusion");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool d = decisions[i] != 0;
    const bool t = truth[i] != 0;
    if (d && t) ++c.tp;
    if (d && !t) ++c.fp;
    if (!d && !t) ++c.tn;
    if (!d && t) ++c.fn;
  }
  return c;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_lengths(scores.size(), truth.size(), "roc_curve");
  std::uint64_t positives = 0;
  for (auto t : truth) positives += (t != 0);
  const std::uint64_t negatives = truth.size() - positives;
  if (positives == 0 || negatives == 0) throw PreconditionError("roc_curve needs both members and non-members");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve out;
  out.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in units of one (positive, negative) pair.
  std::uint64_t area2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (truth[order[i]] ? dtp : dfp) += 1;
      ++i;
    }
    area2 += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    out.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                          static_cast<double>(tp) / static_cast<double>(positives)});
  }
  out.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return out;
}

double rank_auc(std::span<const double> member_scores, std::span<const double> nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty()) throw PreconditionError("rank_auc needs both classes");
  std::vector<double> scores;
  Bits truth;
  scores.reserve(member_scores.size() + nonmember_scores.size());
  for (double s : member_scores) {
    scores.push_back(s);
    truth.push_back(1);
  }
  for (double s : nonmember_scores) {
    scores.push_back(s);
    truth.push_back(0);
  }
  return roc_curve(scores, truth).auc;
}

ThresholdFit fit_lower_threshold(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  check_lengths(scores.size(), truth.size(), "threshold sweep");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::size_t total_neg = 0;
  for (auto t : truth) total_neg += (t == 0);

  // Threshold below everything: all predicted non-member.
  std::size_t correct = total_neg;
  const double lo = scores[order.front()];
  ThresholdFit best{lo - std::max(1.0, std::abs(lo)), static_cast<double>(correct) / scores.size()};

  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      // This row flips to "member".
      correct += truth[order[i]] ? 1 : 0;
      correct -= truth[order[i]] ? 0 : 1;
      ++i;
    }
    const double threshold = i < order.size() ? s + (scores[order[i]] - s) / 2.0 : s + std::max(1.0, std::abs(s));
    const double value = static_cast<double>(correct) / scores.size();
    if (value > best.asr) best = {threshold, value};
  }
  return best;
}

EvalReport make_report(std::span<const double> evidence, std::span<const std::uint8_t> decisions,
                       std::span<const std::uint8_t> truth, ReportMeta meta) {
  EvalReport report;
  report.confusion = confusion_counts(decisions, truth);
  report.asr = asr(decisions, truth);
  auto roc = roc_curve(evidence, truth);
  report.roc = std::move(roc.points);
  report.auc = roc.auc;
  report.meta = std::move(meta);
  return report;
}

std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : roc) out += fmt("%.17g", p.fpr) + "," + fmt("%.17g", p.tpr) + "\n";
  return out;
}

std::string report_text(const EvalReport& report) {
  std::string out;
  out += "attack   " + report.meta.attack + "\n";
  out += "asr      " + fmt("%.4f", report.asr) + "\n";
  out += "auc      " + fmt("%.4f", report.auc) + "\n";
  out += "tp fp tn fn  " + std::to_string(report.confusion.tp) + " " + std::to_string(report.confusion.fp) + " " +
         std::to_string(report.confusion.tn) + " " + std::to_string(report.confusion.fn) + "\n";
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["attack"] = report.meta.attack;
  j["asr"] = report.asr;
  j["auc"] = report.auc;
  j["confusion"] = {{"tp", report.confusion.tp},
                    {"fp", report.confusion.fp},
                    {"tn", report.confusion.tn},
                    {"fn", report.confusion.fn}};
  j["seeds"] = report.meta.seeds;
  j["config_digest"] = report.meta.config_digest;
  j["roc_points"] = report.roc.size();
  return j.dump(2) + "\n";
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / values.size())};
}

}  // namespace simmia
