#include "simmia/synth_gen.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "simmia/errors.hpp"
#include "simmia/rng.hpp"

namespace simmia {

namespace {

constexpr double kInverseDistanceEps = 1e-9;

std::string num(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

void SynthConfig::validate() const {
  if (k < 2) throw ArgumentError("synth: k must be at least 2");
  if (dim < 2) throw ArgumentError("synth: dim must be at least 2");
  if (!(sigma_train >= 0.0) || !(sigma_test > 0.0)) {
    throw ArgumentError("synth: sigma_train must be >= 0 and sigma_test > 0");
  }
  if (sigma_train > sigma_test) throw ArgumentError("synth: sigma_train must not exceed sigma_test");
  if (!(center_scale > 0.0) || !std::isfinite(center_scale)) throw ArgumentError("synth: center_scale must be positive");
  if (per_identity_members + per_identity_nonmembers == 0) {
    throw ArgumentError("synth: every identity needs at least one sample");
  }
}

std::string SynthConfig::describe() const {
  return "synth k=" + std::to_string(k) + " dim=" + std::to_string(dim) +
         " per_identity_members=" + std::to_string(per_identity_members) +
         " per_identity_nonmembers=" + std::to_string(per_identity_nonmembers) + " sigma_train=" + num(sigma_train) +
         " sigma_test=" + num(sigma_test) + " center_scale=" + num(center_scale) + " seed=" + std::to_string(seed);
}

SynthConfig SynthConfig::parse(const std::string& text) {
  std::istringstream in(text);
  std::string token;
  in >> token;
  if (token != "synth") throw FormatError("ground truth provenance does not describe a synthetic config");
  std::map<std::string, std::string> fields;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FormatError("bad synth config token '" + token + "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError(std::string("synth config missing ") + key);
    return it->second;
  };
  SynthConfig c;
  try {
    c.k = std::stoull(get("k"));
    c.dim = std::stoull(get("dim"));
    c.per_identity_members = std::stoull(get("per_identity_members"));
    c.per_identity_nonmembers = std::stoull(get("per_identity_nonmembers"));
    c.sigma_train = std::stod(get("sigma_train"));
    c.sigma_test = std::stod(get("sigma_test"));
    c.center_scale = std::stod(get("center_scale"));
    c.seed = std::stoull(get("seed"));
  } catch (const std::logic_error&) {
    throw FormatError("unparsable synth config: " + text);
  }
  return c;
}

std::pair<EmbeddingDataset, SynthGroundTruth> generate(const SynthConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, 0x53594e5448ULL));
  const auto k = static_cast<Eigen::Index>(config.k);
  const auto dim = static_cast<Eigen::Index>(config.dim);

  SynthGroundTruth gt;
  gt.config = config;
  gt.centers.resize(k, dim);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd direction(dim);
    do {
      for (Eigen::Index d = 0; d < dim; ++d) direction(d) = rng.normal();
    } while (direction.norm() == 0.0);
    direction *= config.center_scale / direction.norm();
    for (Eigen::Index d = 0; d < dim; ++d) gt.centers(j, d) = static_cast<float>(direction(d));
  }
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      if (gt.centers.row(a) == gt.centers.row(b)) throw Error("synth: drew coincident identity centers");
    }
  }

  EmbeddingDataset ds;
  ds.dim = static_cast<std::uint32_t>(config.dim);
  ds.provenance = config.describe();
  ds.records.reserve(config.k * (config.per_identity_members + config.per_identity_nonmembers));
  auto emit = [&](Eigen::Index identity, bool member, double sigma) {
    EmbeddingRecord rec;
    rec.row_id = ds.records.size();
    rec.identity = static_cast<std::int32_t>(identity);
    rec.membership = member;
    rec.vector.resize(config.dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double noise = sigma * rng.normal();
      rec.vector[static_cast<std::size_t>(d)] = static_cast<float>(gt.centers(identity, d) + noise);
    }
    ds.records.push_back(std::move(rec));
  };
  for (Eigen::Index j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < config.per_identity_members; ++i) emit(j, true, config.sigma_train);
    for (std::size_t i = 0; i < config.per_identity_nonmembers; ++i) emit(j, false, config.sigma_test);
  }
  return {std::move(ds), std::move(gt)};
}

EmbeddingDataset ground_truth_dataset(const SynthGroundTruth& gt) {
  EmbeddingDataset ds;
  ds.dim = static_cast<std::uint32_t>(gt.centers.cols());
  ds.provenance = gt.config.describe();
  for (Eigen::Index j = 0; j < gt.centers.rows(); ++j) {
    EmbeddingRecord rec;
    rec.row_id = static_cast<std::uint64_t>(j);
    rec.identity = static_cast<std::int32_t>(j);
    for (Eigen::Index d = 0; d < gt.centers.cols(); ++d) rec.vector.push_back(static_cast<float>(gt.centers(j, d)));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

SynthGroundTruth ground_truth_from_dataset(const EmbeddingDataset& ds) {
  SynthGroundTruth gt;
  gt.config = SynthConfig::parse(ds.provenance);
  if (gt.config.k != ds.size() || gt.config.dim != ds.dim) {
    throw FormatError("ground truth rows do not match its recorded config");
  }
  gt.centers.resize(static_cast<Eigen::Index>(ds.size()), ds.dim);
  for (std::size_t j = 0; j < ds.size(); ++j) {
    for (std::uint32_t d = 0; d < ds.dim; ++d) gt.centers(static_cast<Eigen::Index>(j), d) = ds[j].vector[d];
  }
  return gt;
}

Kernel parse_kernel(std::string_view name) {
  if (name == "gaussian") return Kernel::kGaussian;
  if (name == "inverse_distance") return Kernel::kInverseDistance;
  throw ArgumentError("unknown kernel '" + std::string(name) + "'");
}

std::string_view to_string(Kernel kernel) {
  return kernel == Kernel::kGaussian ? "gaussian" : "inverse_distance";
}

double known_center_score(std::span<const double> x, std::size_t y, const SynthGroundTruth& gt, Kernel kernel) {
  const auto k = static_cast<std::size_t>(gt.centers.rows());
  if (y >= k) throw ArgumentError("identity " + std::to_string(y) + " out of range for " + std::to_string(k) + " centers");
  if (x.size() != static_cast<std::size_t>(gt.centers.cols())) throw ArgumentError("embedding dimension mismatch");

  // log similarity to each center
  std::vector<double> log_sim(k);
  for (std::size_t j = 0; j < k; ++j) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double diff = x[d] - gt.centers(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d));
      d2 += diff * diff;
    }
    log_sim[j] = kernel == Kernel::kGaussian ? -0.5 * d2 : -std::log(kInverseDistanceEps + std::sqrt(d2));
  }
  // log(sum_j exp(l_j)) - l_y = log1p(sum_{j != y} exp(l_j - l_y))
  double rest = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (j != y) rest += std::exp(log_sim[j] - log_sim[y]);
  }
  return std::log1p(rest);
}

EvalReport oracle_threshold_attack(const EmbeddingDataset& ds, const SynthGroundTruth& gt, Kernel kernel) {
  if (!ds.has_identities()) throw PreconditionError("oracle attack needs identity labels");
  auto scores_for = [&](Split split, std::vector<double>& scores, Bits& truth) {
    for (auto row : ds.rows_in(split)) {
      const auto& rec = ds[row];
      if (!rec.identity) throw PreconditionError("oracle attack: row " + std::to_string(row) + " has no identity");
      scores.push_back(known_center_score(to_double(rec.vector), static_cast<std::size_t>(*rec.identity), gt, kernel));
      truth.push_back(*rec.membership ? 1 : 0);
    }
  };
  std::vector<double> train_scores, eval_scores;
  Bits train_truth, eval_truth;
  scores_for(Split::kAttackTrain, train_scores, train_truth);
  scores_for(Split::kAttackEval, eval_scores, eval_truth);
  if (train_scores.empty() || eval_scores.empty()) throw PreconditionError("oracle attack needs attack_train and attack_eval rows");

  const auto fit = fit_lower_threshold(train_scores, train_truth);
  Bits decisions;
  std::vector<double> evidence;
  for (double s : eval_scores) {
    decisions.push_back(s <= fit.threshold ? 1 : 0);
    evidence.push_back(-s);
  }
  ReportMeta meta;
  meta.attack = "oracle_" + std::string(to_string(kernel));
  meta.seeds = {gt.config.seed};
  return make_report(evidence, decisions, eval_truth, std::move(meta));
}

}  // namespace simmia
