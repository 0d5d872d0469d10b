#include "simmia/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "simmia/errors.hpp"
#include "simmia/rng.hpp"

namespace simmia {

ReferenceSet sample_reference_set(const EmbeddingDataset& ds, double fraction, std::uint64_t seed,
                                  const ReferenceOptions& options) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("reference fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  std::vector<std::size_t> pool;
  if (options.allow_attack_overlap) {
    pool.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) pool[i] = i;
  } else {
    pool = ds.rows_in(Split::kReferencePool);
  }
  if (pool.empty()) throw PreconditionError("reference pool is empty");

  const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  const std::size_t n = std::clamp<std::size_t>(wanted, 1, pool.size());

  Rng rng(derive_seed(seed, 0x414e43484f52ULL));
  rng.shuffle(pool);
  pool.resize(n);
  return ReferenceSet{std::move(pool), seed, fraction};
}

void check_reference_set(const ReferenceSet& refs, const EmbeddingDataset& ds) {
  if (refs.row_ids.empty()) throw ArgumentError("reference set is empty");
  for (auto row : refs.row_ids) {
    if (row >= ds.size()) {
      throw ArgumentError("anchor row " + std::to_string(row) + " outside dataset of " +
                          std::to_string(ds.size()) + " rows");
    }
  }
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ArgumentError("vector length mismatch in distance");
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    sum += d * d;
  }
  return sum;
}

SimilarityVector similarity_vector(const EmbeddingRecord& target, const ReferenceSet& refs,
                                   const EmbeddingDataset& ds) {
  if (target.vector.size() != ds.dim) {
    throw ArgumentError("target dimension " + std::to_string(target.vector.size()) +
                        " does not match dataset dimension " + std::to_string(ds.dim));
  }
  check_reference_set(refs, ds);
  SimilarityVector out;
  out.target_row = target.row_id;
  out.values.reserve(refs.size());
  for (auto row : refs.row_ids) out.values.push_back(squared_distance(target.vector, ds[row].vector));
  return out;
}

DistanceMatrix distance_matrix(std::span<const std::size_t> targets, const ReferenceSet& refs,
                               const EmbeddingDataset& ds, unsigned threads) {
  check_reference_set(refs, ds);
  for (auto t : targets) {
    if (t >= ds.size()) throw ArgumentError("target row " + std::to_string(t) + " outside dataset");
  }
  DistanceMatrix out(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(refs.size()));

  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto& x = ds[targets[t]].vector;
      for (std::size_t a = 0; a < refs.size(); ++a) {
        out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a)) =
            squared_distance(x, ds[refs.row_ids[a]].vector);
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, targets.size()));
  if (workers <= 1) {
    fill(0, targets.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t block = (targets.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(targets.size(), begin + block);
    if (begin >= end) break;
    pool.emplace_back(fill, begin, end);
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace simmia
