#ifndef SIMMIA_SYNTH_GEN_HPP
#define SIMMIA_SYNTH_GEN_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "simmia/embedding_store.hpp"
#include "simmia/eval_report.hpp"

namespace simmia {

// Synthetic Re-ID-like embeddings: k identity centers on a sphere, members
// scattered around their center with sigma_train, non-members with
// sigma_test. A smaller training spread models the compaction a trained
// metric model applies to its own training images.
struct SynthConfig {
  std::size_t k = 50;
  std::size_t dim = 64;
  std::size_t per_identity_members = 100;
  std::size_t per_identity_nonmembers = 100;
  double sigma_train = 0.1;
  double sigma_test = 0.3;
  double center_scale = 1.0;
  std::uint64_t seed = 0;

  // Throws ArgumentError.
  void validate() const;
  // Stable key=value rendering; stored as dataset provenance.
  std::string describe() const;
  // Inverse of describe(); throws FormatError.
  static SynthConfig parse(const std::string& text);
};

struct SynthGroundTruth {
  Eigen::MatrixXd centers;  // k x dim, f32-representable
  SynthConfig config;
};

// Rows are laid out identity by identity: members first, then non-members.
std::pair<EmbeddingDataset, SynthGroundTruth> generate(const SynthConfig& config);

// Ground truth as a container whose rows are the centers (identity = row).
EmbeddingDataset ground_truth_dataset(const SynthGroundTruth& gt);
SynthGroundTruth ground_truth_from_dataset(const EmbeddingDataset& ds);

enum class Kernel { kInverseDistance, kGaussian };

Kernel parse_kernel(std::string_view name);
std::string_view to_string(Kernel kernel);

// -log( s(x, a_y) / sum_j s(x, a_j) ) for a positive similarity s; lower
// means stronger member evidence. Computed in log space so far-away centers
// do not underflow the ratio.
double known_center_score(std::span<const double> x, std::size_t y, const SynthGroundTruth& gt, Kernel kernel);

// Threshold on known_center_score fitted on attack_train (score <= t means
// member), reported on attack_eval.
EvalReport oracle_threshold_attack(const EmbeddingDataset& ds, const SynthGroundTruth& gt, Kernel kernel);

}  // namespace simmia

#endif  // SIMMIA_SYNTH_GEN_HPP
