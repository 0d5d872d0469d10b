#include "simmia/stats_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "simmia/errors.hpp"

namespace simmia {

namespace {

void check_membership(const DistanceMatrix& dm, std::span<const std::uint8_t> membership) {
  if (static_cast<std::size_t>(dm.rows()) != membership.size()) {
    throw ArgumentError("membership length " + std::to_string(membership.size()) + " does not match " +
                        std::to_string(dm.rows()) + " targets");
  }
  const auto members = std::count_if(membership.begin(), membership.end(), [](auto m) { return m != 0; });
  if (members == 0 || static_cast<std::size_t>(members) == membership.size()) {
    throw PreconditionError("statistics need both member and non-member targets");
  }
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

template <typename Get>
Moments moments(std::size_t n, Get get) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += get(i);
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = get(i) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace

std::vector<PerReferenceStats> per_reference_stats(const DistanceMatrix& dm, std::span<const std::uint8_t> membership) {
  check_membership(dm, membership);
  std::vector<Eigen::Index> members, nonmembers;
  for (std::size_t i = 0; i < membership.size(); ++i) {
    (membership[i] ? members : nonmembers).push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<PerReferenceStats> out;
  out.reserve(static_cast<std::size_t>(dm.cols()));
  for (Eigen::Index c = 0; c < dm.cols(); ++c) {
    const auto m = moments(members.size(), [&](std::size_t i) { return dm(members[i], c); });
    const auto n = moments(nonmembers.size(), [&](std::size_t i) { return dm(nonmembers[i], c); });
    out.push_back({static_cast<std::size_t>(c), m.mean, n.mean, m.std, n.std});
  }
  return out;
}

std::vector<CdfPoint> stat_cdf(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("stat_cdf needs at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw ArgumentError("stat_cdf input must be finite");
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  out.back().cumulative_fraction = 1.0;
  return out;
}

std::vector<double> row_means(const DistanceMatrix& dm) {
  std::vector<double> out(static_cast<std::size_t>(dm.rows()));
  const auto n = static_cast<std::size_t>(dm.cols());
  for (Eigen::Index r = 0; r < dm.rows(); ++r) {
    out[static_cast<std::size_t>(r)] =
        moments(n, [&](std::size_t c) { return dm(r, static_cast<Eigen::Index>(c)); }).mean;
  }
  return out;
}

std::vector<double> row_stds(const DistanceMatrix& dm) {
  std::vector<double> out(static_cast<std::size_t>(dm.rows()));
  const auto n = static_cast<std::size_t>(dm.cols());
  for (Eigen::Index r = 0; r < dm.rows(); ++r) {
    out[static_cast<std::size_t>(r)] =
        moments(n, [&](std::size_t c) { return dm(r, static_cast<Eigen::Index>(c)); }).std;
  }
  return out;
}

GapSummary gap_summary(const DistanceMatrix& dm, std::span<const std::uint8_t> membership) {
  check_membership(dm, membership);
  if (dm.cols() == 0) throw PreconditionError("gap_summary needs at least one anchor");
  const auto means = row_means(dm);
  const auto stds = row_stds(dm);
  // "member below non-member" is "negated member above negated non-member".
  auto auc_below = [&](const std::vector<double>& stat) {
    std::vector<double> m, n;
    for (std::size_t i = 0; i < stat.size(); ++i) (membership[i] ? m : n).push_back(-stat[i]);
    return rank_auc(m, n);
  };
  return {auc_below(means), auc_below(stds)};
}

std::string per_reference_stats_csv(const std::vector<PerReferenceStats>& stats) {
  std::string out = "ref_index,mean_member,mean_nonmember,std_member,std_nonmember\n";
  char line[256];
  for (const auto& s : stats) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g\n", s.ref_index, s.mean_member, s.mean_nonmember,
                  s.std_member, s.std_nonmember);
    out += line;
  }
  return out;
}

}  // namespace simmia
