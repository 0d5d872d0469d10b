#ifndef SIMMIA_EXPERIMENTS_HPP
#define SIMMIA_EXPERIMENTS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simmia/attacks.hpp"
#include "simmia/embedding_store.hpp"
#include "simmia/eval_report.hpp"
#include "simmia/similarity.hpp"

namespace simmia {

struct ExperimentConfig {
  AttackTrainConfig attack;        // attack.train.seed is replaced by each entry of seeds
  std::vector<std::uint64_t> seeds{0};
  std::string config_digest;       // copied into every report
};

struct ComparisonRow {
  AttackSpec spec;
  std::vector<EvalReport> reports;  // one per seed, in seed order
  MeanStd asr;
  MeanStd auc;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

// Trains and evaluates every kind on the shared attack_eval split once per
// seed. refs may be null when no kind needs anchors.
ComparisonTable compare_attacks(const EmbeddingDataset& ds, const ReferenceSet* refs,
                                std::span<const AttackSpec> kinds, const ExperimentConfig& config);

std::string comparison_text(const ComparisonTable& table);
std::string comparison_csv(const ComparisonTable& table);

struct SweepCell {
  double fraction = 0.0;
  std::size_t anchors = 0;
  AttackSpec spec;
  std::vector<double> asr;  // per seed
  MeanStd summary;
};

struct SweepTable {
  std::vector<SweepCell> cells;  // fraction-major, kinds in request order
};

// Re-samples anchors at every fraction (reference seed ref_seed) and retrains
// every kind per seed. Kinds must be SD, AS_SD or FE.
SweepTable fraction_sweep(const EmbeddingDataset& ds, std::span<const double> fractions,
                          std::span<const AttackSpec> kinds, const ExperimentConfig& config,
                          std::uint64_t ref_seed, const ReferenceOptions& ref_options = {});

// fraction,anchors,kind,mean_asr,std_asr
std::string sweep_csv(const SweepTable& table);
std::string sweep_text(const SweepTable& table);

// Formats a double with the shortest round-trip representation.
std::string format_double(double value);

}  // namespace simmia

#endif  // SIMMIA_EXPERIMENTS_HPP
