#ifndef SIMMIA_ATTACKS_HPP
#define SIMMIA_ATTACKS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "simmia/embedding_store.hpp"
#include "simmia/eval_report.hpp"
#include "simmia/similarity.hpp"
#include "simmia/tinynet.hpp"

namespace simmia {

// SD: MLP on the anchor distance vector. AS_SD: the same with a learned
// per-anchor weighting. FE: MLP on the raw embedding. TLOSS: threshold on a
// triplet loss. U: MLP on intra-identity distance statistics.
enum class AttackKind : std::uint8_t { kSd = 0, kAsSd = 1, kFe = 2, kTloss = 3, kU = 4 };

// Number of sampled positives; kHigh uses every positive.
enum class UVariant : std::uint8_t { kLow = 2, kMid = 4, kHigh = 0 };

struct AttackSpec {
  AttackKind kind = AttackKind::kSd;
  UVariant u_variant = UVariant::kHigh;  // only meaningful for kU

  bool operator==(const AttackSpec&) const = default;
};

// "sd", "as_sd", "fe", "tloss", "u_low", "u_mid", "u_high".
AttackSpec parse_attack(std::string_view name);
std::string to_string(const AttackSpec& spec);

struct AttackOptions {
  std::size_t hidden_width = 512;
  std::size_t hidden_layers = 4;
  double triplet_margin = 0.3;
  std::size_t triplet_negatives = 100;
};

struct AttackTrainConfig {
  tinynet::TrainConfig train;
  AttackOptions options;
};

struct AttackModel {
  AttackSpec spec;
  std::optional<tinynet::Network> net;       // all kinds except TLOSS
  std::optional<tinynet::Network> selector;  // AS_SD: layers Theta1 (K x K, tanh), Theta2 (N x K, sigmoid)
  std::optional<ReferenceSet> refs;          // SD and AS_SD
  double threshold = 0.0;                    // TLOSS
  AttackOptions options;
  std::uint64_t seed = 0;  // drives negative / positive sampling at inference
  std::vector<double> loss_curve;

  // Throws ArgumentError when the parts do not fit together.
  void validate(std::uint32_t dim) const;
};

struct Inference {
  double score = 0.5;     // in [0, 1]; decision = score >= 0.5
  bool member = false;
  double evidence = 0.0;  // monotone in membership likelihood; used for ROC
};

// Rows grouped by identity, built once per dataset.
class IdentityIndex {
 public:
  explicit IdentityIndex(const EmbeddingDataset& ds);
  const std::vector<std::size_t>& rows(std::int32_t identity) const;
  std::size_t size() const { return total_; }

 private:
  std::vector<std::vector<std::size_t>> rows_;
  std::size_t total_ = 0;
};

std::vector<double> sd_features(const EmbeddingRecord& target, const ReferenceSet& refs, const EmbeddingDataset& ds);

// w = sigmoid(Theta2 tanh(Theta1 x)).
std::vector<double> selector_weights(std::span<const double> target_embedding, const tinynet::Network& selector);

// u_i = w_i * v_i.
std::vector<double> rescale(std::span<const double> w, std::span<const double> v);

tinynet::Network make_selector(Eigen::Index dim, Eigen::Index anchors, std::uint64_t seed);

// Mean over (positive, negative) pairs of max(0, d(a,p) - d(a,n) + margin)
// with the target as anchor, every other same-identity row as positive and
// min(negatives, available) seeded other-identity rows as negatives.
double tloss_score(std::size_t target_row, const EmbeddingDataset& ds, const IdentityIndex& index,
                   const AttackOptions& options, std::uint64_t seed);
double tloss_score(std::size_t target_row, const EmbeddingDataset& ds, const AttackOptions& options = {},
                   std::uint64_t seed = 0);

// [mean, std, min, max] of squared distances over all pairs drawn from the
// target plus its sampled positives.
std::vector<double> u_features(std::size_t target_row, const EmbeddingDataset& ds, const IdentityIndex& index,
                               UVariant variant, std::uint64_t seed);
std::vector<double> u_features(std::size_t target_row, const EmbeddingDataset& ds, UVariant variant,
                               std::uint64_t seed = 0);

inline constexpr std::size_t kUFeatureWidth = 4;

// Feature matrix fed to the MLP (features x targets) for SD / FE / U.
Eigen::MatrixXd attack_features(const AttackSpec& spec, std::span<const std::size_t> rows, const EmbeddingDataset& ds,
                                const ReferenceSet* refs, const IdentityIndex* index, std::uint64_t seed);

// Embedding columns (dim x targets).
Eigen::MatrixXd embedding_matrix(std::span<const std::size_t> rows, const EmbeddingDataset& ds);

// Mean BCE of the AS_SD composition on a batch and its gradients with respect
// to the selector (grads[0]) and the MLP (grads[1]).
double as_sd_loss(const tinynet::Network& selector, const tinynet::Network& mlp, const Eigen::MatrixXd& embeddings,
                  const Eigen::MatrixXd& distances, std::span<const std::uint8_t> labels,
                  std::vector<tinynet::Gradients>* grads);

// Membership probabilities of the AS_SD composition.
Eigen::VectorXd as_sd_predict(const tinynet::Network& selector, const tinynet::Network& mlp,
                              const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& distances);

// Trains on the attack_train split. refs is required for SD / AS_SD.
AttackModel train_attack(const AttackSpec& spec, const EmbeddingDataset& ds, const ReferenceSet* refs,
                         const AttackTrainConfig& config);

Inference infer(const AttackModel& model, std::size_t target_row, const EmbeddingDataset& ds);

// Batched inference over many targets. Matches infer per row up to
// floating-point summation order inside the matrix products.
std::vector<Inference> infer_rows(const AttackModel& model, std::span<const std::size_t> rows,
                                  const EmbeddingDataset& ds);

// Runs the model on attack_eval and builds the report.
EvalReport evaluate_attack(const AttackModel& model, const EmbeddingDataset& ds, ReportMeta meta);

void save_attack_model(const AttackModel& model, const std::filesystem::path& path);
AttackModel load_attack_model(const std::filesystem::path& path);

}  // namespace simmia

#endif  // SIMMIA_ATTACKS_HPP
