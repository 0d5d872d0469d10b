#ifndef SIMMIA_SIMILARITY_HPP
#define SIMMIA_SIMILARITY_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "simmia/embedding_store.hpp"

namespace simmia {

// Target-by-anchor squared distances, one target per row.
using DistanceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Ordered anchor rows. The order is part of the contract: a trained anchor
// selector is bound to it position by position.
struct ReferenceSet {
  std::vector<std::size_t> row_ids;
  std::uint64_t seed = 0;
  double fraction = 1.0;

  std::size_t size() const { return row_ids.size(); }
  bool operator==(const ReferenceSet&) const = default;
};

struct SimilarityVector {
  std::vector<double> values;  // squared distances; larger = less similar
  std::size_t target_row = 0;
};

struct ReferenceOptions {
  // Draw anchors from every row instead of the reference_pool split only.
  // Ablation switch; the default keeps anchors disjoint from attack targets.
  bool allow_attack_overlap = false;
};

// N = max(1, round(fraction * pool)) anchors: the first N entries of a seeded
// permutation of the pool, so smaller fractions are prefixes of larger ones.
ReferenceSet sample_reference_set(const EmbeddingDataset& ds, double fraction, std::uint64_t seed,
                                  const ReferenceOptions& options = {});

// Checks that every anchor row exists in ds; throws ArgumentError otherwise.
void check_reference_set(const ReferenceSet& refs, const EmbeddingDataset& ds);

double squared_distance(std::span<const float> a, std::span<const float> b);

SimilarityVector similarity_vector(const EmbeddingRecord& target, const ReferenceSet& refs,
                                   const EmbeddingDataset& ds);

// Row t equals similarity_vector(ds[targets[t]]). `threads` > 1 splits the
// targets into contiguous blocks; the result does not depend on it.
DistanceMatrix distance_matrix(std::span<const std::size_t> targets, const ReferenceSet& refs,
                               const EmbeddingDataset& ds, unsigned threads = 1);

}  // namespace simmia

#endif  // SIMMIA_SIMILARITY_HPP
