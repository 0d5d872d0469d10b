#include "simmia/experiments.hpp"

#include <charconv>
#include <cstdio>
#include <map>

#include "simmia/errors.hpp"

namespace simmia {

namespace {

std::string fixed(double value, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

bool needs_anchors(const AttackSpec& spec) { return spec.kind == AttackKind::kSd || spec.kind == AttackKind::kAsSd; }

EvalReport run_once(const EmbeddingDataset& ds, const ReferenceSet* refs, const AttackSpec& spec,
                    const ExperimentConfig& config, std::uint64_t seed) {
  AttackTrainConfig tc = config.attack;
  tc.train.seed = seed;
  const AttackModel model = train_attack(spec, ds, refs, tc);
  ReportMeta meta;
  meta.attack = to_string(spec);
  meta.seeds = {seed};
  meta.config_digest = config.config_digest;
  return evaluate_attack(model, ds, std::move(meta));
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

ComparisonTable compare_attacks(const EmbeddingDataset& ds, const ReferenceSet* refs,
                                std::span<const AttackSpec> kinds, const ExperimentConfig& config) {
  if (kinds.empty()) throw ArgumentError("compare: no attack kinds");
  if (config.seeds.empty()) throw ArgumentError("compare: no seeds");
  ComparisonTable table;
  for (const auto& spec : kinds) {
    ComparisonRow row;
    row.spec = spec;
    std::vector<double> asrs, aucs;
    for (auto seed : config.seeds) {
      row.reports.push_back(run_once(ds, needs_anchors(spec) ? refs : nullptr, spec, config, seed));
      asrs.push_back(row.reports.back().asr);
      aucs.push_back(row.reports.back().auc);
    }
    row.asr = mean_std(asrs);
    row.auc = mean_std(aucs);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string comparison_text(const ComparisonTable& table) {
  std::string out = pad("attack", 10) + pad("seeds", 7) + pad("asr_mean", 10) + pad("asr_std", 10) +
                    pad("auc_mean", 10) + "auc_std\n";
  for (const auto& row : table.rows) {
    out += pad(to_string(row.spec), 10) + pad(std::to_string(row.reports.size()), 7) +
           pad(fixed(row.asr.mean, 4), 10) + pad(fixed(row.asr.std, 4), 10) + pad(fixed(row.auc.mean, 4), 10) +
           fixed(row.auc.std, 4) + "\n";
  }
  return out;
}

std::string comparison_csv(const ComparisonTable& table) {
  std::string out = "attack,seeds,asr_mean,asr_std,auc_mean,auc_std\n";
  for (const auto& row : table.rows) {
    out += to_string(row.spec) + "," + std::to_string(row.reports.size()) + "," + format_double(row.asr.mean) + "," +
           format_double(row.asr.std) + "," + format_double(row.auc.mean) + "," + format_double(row.auc.std) + "\n";
  }
  return out;
}

SweepTable fraction_sweep(const EmbeddingDataset& ds, std::span<const double> fractions,
                          std::span<const AttackSpec> kinds, const ExperimentConfig& config, std::uint64_t ref_seed,
                          const ReferenceOptions& ref_options) {
  if (fractions.empty() || kinds.empty()) throw ArgumentError("sweep: need fractions and kinds");
  if (config.seeds.empty()) throw ArgumentError("sweep: no seeds");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("sweep: fraction " + format_double(f) + " outside (0, 1]");
  }
  for (const auto& spec : kinds) {
    if (!needs_anchors(spec) && spec.kind != AttackKind::kFe) {
      throw ArgumentError("sweep: kind " + to_string(spec) + " is not anchor-based");
    }
  }
  std::map<std::uint64_t, double> fe_cache;  // FE ignores anchors
  SweepTable table;
  for (double f : fractions) {
    const ReferenceSet refs = sample_reference_set(ds, f, ref_seed, ref_options);
    for (const auto& spec : kinds) {
      SweepCell cell;
      cell.fraction = f;
      cell.anchors = refs.size();
      cell.spec = spec;
      for (auto seed : config.seeds) {
        if (spec.kind == AttackKind::kFe) {
          auto it = fe_cache.find(seed);
          if (it == fe_cache.end()) it = fe_cache.emplace(seed, run_once(ds, nullptr, spec, config, seed).asr).first;
          cell.asr.push_back(it->second);
        } else {
          cell.asr.push_back(run_once(ds, &refs, spec, config, seed).asr);
        }
      }
      cell.summary = mean_std(cell.asr);
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

std::string sweep_csv(const SweepTable& table) {
  std::string out = "fraction,anchors,kind,mean_asr,std_asr\n";
  for (const auto& c : table.cells) {
    out += format_double(c.fraction) + "," + std::to_string(c.anchors) + "," + to_string(c.spec) + "," +
           format_double(c.summary.mean) + "," + format_double(c.summary.std) + "\n";
  }
  return out;
}

std::string sweep_text(const SweepTable& table) {
  std::string out = pad("fraction", 10) + pad("anchors", 9) + pad("kind", 8) + pad("asr_mean", 10) + "asr_std\n";
  for (const auto& c : table.cells) {
    out += pad(format_double(c.fraction), 10) + pad(std::to_string(c.anchors), 9) + pad(to_string(c.spec), 8) +
           pad(fixed(c.summary.mean, 4), 10) + fixed(c.summary.std, 4) + "\n";
  }
  return out;
}

}  // namespace simmia
