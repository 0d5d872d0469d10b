#ifndef SIMMIA_STATS_ANALYSIS_HPP
#define SIMMIA_STATS_ANALYSIS_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simmia/eval_report.hpp"
#include "simmia/similarity.hpp"

namespace simmia {

// Column statistics of a distance matrix split by target membership.
// Standard deviations are population (divide by count).
struct PerReferenceStats {
  std::size_t ref_index = 0;
  double mean_member = 0.0;
  double mean_nonmember = 0.0;
  double std_member = 0.0;
  double std_nonmember = 0.0;
};

struct CdfPoint {
  double value = 0.0;
  double cumulative_fraction = 0.0;
  bool operator==(const CdfPoint&) const = default;
};

// AUCs of P(member statistic < non-member statistic) + ties / 2 for the
// per-target mean and std over anchors. 0.5 = no separation.
struct GapSummary {
  double mean_gap_auc = 0.5;
  double std_gap_auc = 0.5;
};

std::vector<PerReferenceStats> per_reference_stats(const DistanceMatrix& dm, std::span<const std::uint8_t> membership);

// Step-function support points: one per distinct value, ascending.
std::vector<CdfPoint> stat_cdf(std::span<const double> values);

// Per-row mean and population std over anchors.
std::vector<double> row_means(const DistanceMatrix& dm);
std::vector<double> row_stds(const DistanceMatrix& dm);

GapSummary gap_summary(const DistanceMatrix& dm, std::span<const std::uint8_t> membership);

std::string per_reference_stats_csv(const std::vector<PerReferenceStats>& stats);

}  // namespace simmia

#endif  // SIMMIA_STATS_ANALYSIS_HPP
