#include "simmia/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "simmia/binary_io.hpp"
#include "simmia/errors.hpp"
#include "simmia/rng.hpp"

namespace simmia {

namespace {

using tinynet::Network;

constexpr std::uint64_t kTlossStream = 0x544c4f5353ULL;
constexpr std::uint64_t kUStream = 0x5553455256ULL;
constexpr Eigen::Index kInferenceChunk = 1024;

std::int32_t require_identity(const EmbeddingDataset& ds, std::size_t row, const char* who) {
  if (row >= ds.size()) throw ArgumentError(std::string(who) + ": row " + std::to_string(row) + " outside dataset");
  const auto& id = ds[row].identity;
  if (!id) throw PreconditionError(std::string(who) + ": row " + std::to_string(row) + " has no identity");
  return *id;
}

std::vector<double> pair_summary(const std::vector<std::size_t>& points, const EmbeddingDataset& ds) {
  std::vector<double> d;
  d.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      d.push_back(squared_distance(ds[points[i]].vector, ds[points[j]].vector));
    }
  }
  const auto ms = mean_std(d);
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  return {ms.mean, ms.std, *lo, *hi};
}

std::vector<std::size_t> positives_of(std::size_t target, const IdentityIndex& index, std::int32_t identity) {
  std::vector<std::size_t> out;
  for (auto r : index.rows(identity)) {
    if (r != target) out.push_back(r);
  }
  return out;
}

Bits labels_of(std::span<const std::size_t> rows, const EmbeddingDataset& ds) {
  Bits labels;
  labels.reserve(rows.size());
  for (auto r : rows) {
    if (!ds[r].membership) throw PreconditionError("row " + std::to_string(r) + " has no membership label");
    labels.push_back(*ds[r].membership ? 1 : 0);
  }
  return labels;
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& m, std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(cols[i]));
  return out;
}

double tloss_to_unit(double tloss, double threshold) {
  const double d = threshold - tloss;
  const double scale = std::max(std::abs(threshold), 1e-9);
  return 0.5 + 0.5 * d / (std::abs(d) + scale);
}

constexpr std::uint8_t kCheckpointMagic[4] = {'A', 'T', 'K', '1'};
constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

AttackSpec parse_attack(std::string_view name) {
  if (name == "sd") return {AttackKind::kSd, UVariant::kHigh};
  if (name == "as_sd") return {AttackKind::kAsSd, UVariant::kHigh};
  if (name == "fe") return {AttackKind::kFe, UVariant::kHigh};
  if (name == "tloss") return {AttackKind::kTloss, UVariant::kHigh};
  if (name == "u_low") return {AttackKind::kU, UVariant::kLow};
  if (name == "u_mid") return {AttackKind::kU, UVariant::kMid};
  if (name == "u_high") return {AttackKind::kU, UVariant::kHigh};
  throw ArgumentError("unknown attack kind '" + std::string(name) + "'");
}

std::string to_string(const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::kSd:
      return "sd";
    case AttackKind::kAsSd:
      return "as_sd";
    case AttackKind::kFe:
      return "fe";
    case AttackKind::kTloss:
      return "tloss";
    case AttackKind::kU:
      switch (spec.u_variant) {
        case UVariant::kLow:
          return "u_low";
        case UVariant::kMid:
          return "u_mid";
        case UVariant::kHigh:
          return "u_high";
      }
  }
  return "unknown";
}

void AttackModel::validate(std::uint32_t dim) const {
  const auto n_refs = refs ? static_cast<Eigen::Index>(refs->size()) : 0;
  if (spec.kind != AttackKind::kTloss && (!net || net->empty() || net->output_width() != 1)) {
    throw ArgumentError(to_string(spec) + " model needs a single-output network");
  }
  switch (spec.kind) {
    case AttackKind::kSd:
      if (!refs || net->input_width() != n_refs) throw ArgumentError("sd model: network width must equal anchor count");
      break;
    case AttackKind::kAsSd: {
      if (!refs || !selector) throw ArgumentError("as_sd model needs a selector and a reference set");
      const auto& l = selector->layers();
      if (l.size() != 2 || l[0].inputs() != dim || l[0].outputs() != dim || l[1].outputs() != n_refs) {
        throw ArgumentError("as_sd selector must be K x K then N x K, with N matching the reference set");
      }
      if (net->input_width() != n_refs) throw ArgumentError("as_sd model: network width must equal anchor count");
      break;
    }
    case AttackKind::kFe:
      if (net->input_width() != static_cast<Eigen::Index>(dim)) {
        throw ArgumentError("fe model: network width must equal embedding dimension");
      }
      break;
    case AttackKind::kU:
      if (net->input_width() != static_cast<Eigen::Index>(kUFeatureWidth)) {
        throw ArgumentError("u model: network width must equal the U feature width");
      }
      break;
    case AttackKind::kTloss:
      break;
  }
}

IdentityIndex::IdentityIndex(const EmbeddingDataset& ds) {
  rows_.resize(ds.num_identities());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].identity) {
      rows_[static_cast<std::size_t>(*ds[i].identity)].push_back(i);
      ++total_;
    }
  }
}

const std::vector<std::size_t>& IdentityIndex::rows(std::int32_t identity) const {
  if (identity < 0 || static_cast<std::size_t>(identity) >= rows_.size()) {
    throw ArgumentError("identity " + std::to_string(identity) + " not in index");
  }
  return rows_[static_cast<std::size_t>(identity)];
}

std::vector<double> sd_features(const EmbeddingRecord& target, const ReferenceSet& refs, const EmbeddingDataset& ds) {
  return similarity_vector(target, refs, ds).values;
}

std::vector<double> selector_weights(std::span<const double> target_embedding, const Network& selector) {
  if (selector.layers().size() != 2) throw ArgumentError("selector must have exactly two layers");
  if (static_cast<Eigen::Index>(target_embedding.size()) != selector.input_width()) {
    throw ArgumentError("selector input width does not match the embedding length");
  }
  const auto out = tinynet::forward(selector, target_embedding).output;
  return {out.data(), out.data() + out.size()};
}

std::vector<double> rescale(std::span<const double> w, std::span<const double> v) {
  if (w.size() != v.size()) throw ArgumentError("rescale: weight and similarity lengths differ");
  std::vector<double> u(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) u[i] = w[i] * v[i];
  return u;
}

Network make_selector(Eigen::Index dim, Eigen::Index anchors, std::uint64_t seed) {
  const tinynet::LayerSpec specs[] = {{dim, tinynet::Activation::kTanh, false},
                                      {anchors, tinynet::Activation::kSigmoid, false}};
  return tinynet::make_network(dim, specs, seed);
}

double tloss_score(std::size_t target_row, const EmbeddingDataset& ds, const IdentityIndex& index,
                   const AttackOptions& options, std::uint64_t seed) {
  const auto identity = require_identity(ds, target_row, "tloss");
  const auto positives = positives_of(target_row, index, identity);
  if (positives.empty()) throw PreconditionError("tloss: row " + std::to_string(target_row) + " has no positive");

  const std::size_t others = index.size() - index.rows(identity).size();
  const std::size_t count = std::min(options.triplet_negatives, others);
  if (count == 0) throw PreconditionError("tloss: no rows with another identity");

  std::vector<std::size_t> negatives;
  negatives.reserve(count);
  if (count == others) {
    for (std::size_t r = 0; r < ds.size(); ++r) {
      if (ds[r].identity && *ds[r].identity != identity) negatives.push_back(r);
    }
  } else {
    Rng rng(derive_seed(derive_seed(seed, kTlossStream), target_row));
    while (negatives.size() < count) {
      const auto r = static_cast<std::size_t>(rng.below(ds.size()));
      if (!ds[r].identity || *ds[r].identity == identity) continue;
      if (std::find(negatives.begin(), negatives.end(), r) != negatives.end()) continue;
      negatives.push_back(r);
    }
  }

  const auto& anchor = ds[target_row].vector;
  std::vector<double> dn;
  dn.reserve(negatives.size());
  for (auto r : negatives) dn.push_back(squared_distance(anchor, ds[r].vector));
  double total = 0.0;
  for (auto p : positives) {
    const double dp = squared_distance(anchor, ds[p].vector) + options.triplet_margin;
    for (double d : dn) total += std::max(0.0, dp - d);
  }
  return total / static_cast<double>(positives.size() * dn.size());
}

double tloss_score(std::size_t target_row, const EmbeddingDataset& ds, const AttackOptions& options,
                   std::uint64_t seed) {
  return tloss_score(target_row, ds, IdentityIndex(ds), options, seed);
}

std::vector<double> u_features(std::size_t target_row, const EmbeddingDataset& ds, const IdentityIndex& index,
                               UVariant variant, std::uint64_t seed) {
  const auto identity = require_identity(ds, target_row, "u_features");
  auto positives = positives_of(target_row, index, identity);
  if (variant == UVariant::kHigh) {
    if (positives.empty()) throw PreconditionError("u_features: row " + std::to_string(target_row) + " has no positive");
    // Target plus every positive is the whole identity, in row order.
    return pair_summary(index.rows(identity), ds);
  }
  const auto wanted = static_cast<std::size_t>(variant);
  if (positives.size() < wanted) {
    throw PreconditionError("u_features: row " + std::to_string(target_row) + " has " +
                            std::to_string(positives.size()) + " positives, needs " + std::to_string(wanted));
  }
  Rng rng(derive_seed(derive_seed(seed, kUStream), target_row));
  std::vector<std::size_t> points{target_row};
  for (auto i : rng.sample(positives.size(), wanted)) points.push_back(positives[i]);
  return pair_summary(points, ds);
}

std::vector<double> u_features(std::size_t target_row, const EmbeddingDataset& ds, UVariant variant,
                               std::uint64_t seed) {
  return u_features(target_row, ds, IdentityIndex(ds), variant, seed);
}

Eigen::MatrixXd embedding_matrix(std::span<const std::size_t> rows, const EmbeddingDataset& ds) {
  Eigen::MatrixXd out(ds.dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = ds[rows[i]].vector;
    for (std::uint32_t d = 0; d < ds.dim; ++d) out(d, static_cast<Eigen::Index>(i)) = v[d];
  }
  return out;
}

Eigen::MatrixXd attack_features(const AttackSpec& spec, std::span<const std::size_t> rows, const EmbeddingDataset& ds,
                                const ReferenceSet* refs, const IdentityIndex* index, std::uint64_t seed) {
  switch (spec.kind) {
    case AttackKind::kSd:
    case AttackKind::kAsSd:
      if (refs == nullptr) throw ArgumentError(to_string(spec) + " needs a reference set");
      return distance_matrix(rows, *refs, ds).transpose();
    case AttackKind::kFe:
      return embedding_matrix(rows, ds);
    case AttackKind::kU: {
      if (index == nullptr) throw ArgumentError("u features need an identity index");
      Eigen::MatrixXd out(static_cast<Eigen::Index>(kUFeatureWidth), static_cast<Eigen::Index>(rows.size()));
      std::map<std::int32_t, std::vector<double>> per_identity;  // kHigh features depend on identity only
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> f;
        if (spec.u_variant == UVariant::kHigh) {
          const auto id = require_identity(ds, rows[i], "u_features");
          auto it = per_identity.find(id);
          if (it == per_identity.end()) it = per_identity.emplace(id, u_features(rows[i], ds, *index, spec.u_variant, seed)).first;
          f = it->second;
        } else {
          f = u_features(rows[i], ds, *index, spec.u_variant, seed);
        }
        for (std::size_t j = 0; j < kUFeatureWidth; ++j) out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = f[j];
      }
      return out;
    }
    case AttackKind::kTloss:
      break;
  }
  throw ArgumentError("tloss has no feature matrix");
}

double as_sd_loss(const Network& selector, const Network& mlp, const Eigen::MatrixXd& embeddings,
                  const Eigen::MatrixXd& distances, std::span<const std::uint8_t> labels,
                  std::vector<tinynet::Gradients>* grads) {
  const tinynet::Tape sel_tape = selector.forward(embeddings);
  const Eigen::MatrixXd& weights = sel_tape.output();
  if (weights.rows() != distances.rows() || weights.cols() != distances.cols()) {
    throw ArgumentError("as_sd: selector output does not match the distance matrix");
  }
  const Eigen::MatrixXd rescaled = weights.cwiseProduct(distances);
  const tinynet::Tape mlp_tape = mlp.forward(rescaled);
  Eigen::MatrixXd output_grad;
  const double loss = tinynet::bce_batch(mlp_tape.output(), labels, output_grad);
  if (grads != nullptr) {
    grads->resize(2);
    Eigen::MatrixXd rescaled_grad;
    (*grads)[1] = mlp.backward(mlp_tape, output_grad, &rescaled_grad);
    (*grads)[0] = selector.backward(sel_tape, rescaled_grad.cwiseProduct(distances));
  }
  return loss;
}

Eigen::VectorXd as_sd_predict(const Network& selector, const Network& mlp, const Eigen::MatrixXd& embeddings,
                              const Eigen::MatrixXd& distances) {
  const tinynet::Tape sel_tape = selector.forward(embeddings);
  return tinynet::predict(mlp, sel_tape.output().cwiseProduct(distances));
}

AttackModel train_attack(const AttackSpec& spec, const EmbeddingDataset& ds, const ReferenceSet* refs,
                         const AttackTrainConfig& config) {
  config.train.validate();
  const auto rows = ds.rows_in(Split::kAttackTrain);
  if (rows.empty()) throw PreconditionError("attack_train split is empty");
  const auto labels = labels_of(rows, ds);
  const auto members = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (members == 0 || members == labels.size()) throw PreconditionError("attack_train needs members and non-members");

  AttackModel model;
  model.spec = spec;
  model.options = config.options;
  model.seed = config.train.seed;

  const bool needs_identity = spec.kind == AttackKind::kTloss || spec.kind == AttackKind::kU;
  if (needs_identity && !ds.has_identities()) throw PreconditionError(to_string(spec) + " needs identity labels");
  if ((spec.kind == AttackKind::kSd || spec.kind == AttackKind::kAsSd) && refs == nullptr) {
    throw ArgumentError(to_string(spec) + " needs a reference set");
  }

  if (spec.kind == AttackKind::kTloss) {
    const IdentityIndex index(ds);
    std::vector<double> scores;
    scores.reserve(rows.size());
    for (auto r : rows) scores.push_back(tloss_score(r, ds, index, config.options, model.seed));
    model.threshold = fit_lower_threshold(scores, labels).threshold;
    return model;
  }

  const std::uint64_t init_seed = derive_seed(config.train.seed, 0x494e4954ULL);
  std::optional<IdentityIndex> index;
  if (needs_identity) index.emplace(ds);
  const Eigen::MatrixXd features =
      attack_features(spec, rows, ds, refs, index ? &*index : nullptr, model.seed);
  model.net = tinynet::make_mlp_classifier(features.rows(), config.options.hidden_width, config.options.hidden_layers,
                                           init_seed);

  if (spec.kind != AttackKind::kAsSd) {
    model.loss_curve = tinynet::train(*model.net, features, labels, config.train).epoch_loss;
  } else {
    model.selector = make_selector(ds.dim, features.rows(), derive_seed(init_seed, 2));
    const Eigen::MatrixXd embeddings = embedding_matrix(rows, ds);
    Network* nets[] = {&*model.selector, &*model.net};
    Bits batch_labels;
    auto objective = [&](std::span<const std::size_t> batch, std::vector<tinynet::Gradients>& grads) {
      batch_labels.resize(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) batch_labels[i] = labels[batch[i]];
      return as_sd_loss(*model.selector, *model.net, columns(embeddings, batch), columns(features, batch),
                        batch_labels, &grads);
    };
    model.loss_curve = tinynet::train(nets, rows.size(), objective, config.train).epoch_loss;
  }
  if (refs != nullptr && (spec.kind == AttackKind::kSd || spec.kind == AttackKind::kAsSd)) model.refs = *refs;
  model.validate(ds.dim);
  return model;
}

std::vector<Inference> infer_rows(const AttackModel& model, std::span<const std::size_t> rows,
                                  const EmbeddingDataset& ds) {
  model.validate(ds.dim);
  std::vector<Inference> out;
  out.reserve(rows.size());
  if (model.spec.kind == AttackKind::kTloss) {
    const IdentityIndex index(ds);
    for (auto r : rows) {
      const double t = tloss_score(r, ds, index, model.options, model.seed);
      out.push_back({tloss_to_unit(t, model.threshold), t <= model.threshold, -t});
    }
    return out;
  }
  std::optional<IdentityIndex> index;
  if (model.spec.kind == AttackKind::kU) index.emplace(ds);
  const ReferenceSet* refs = model.refs ? &*model.refs : nullptr;
  for (std::size_t begin = 0; begin < rows.size(); begin += kInferenceChunk) {
    const auto chunk = rows.subspan(begin, std::min<std::size_t>(kInferenceChunk, rows.size() - begin));
    const Eigen::MatrixXd features = attack_features(model.spec, chunk, ds, refs, index ? &*index : nullptr, model.seed);
    const Eigen::VectorXd p = model.spec.kind == AttackKind::kAsSd
                                  ? as_sd_predict(*model.selector, *model.net, embedding_matrix(chunk, ds), features)
                                  : tinynet::predict(*model.net, features);
    for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back({p(i), p(i) >= 0.5, p(i)});
  }
  return out;
}

Inference infer(const AttackModel& model, std::size_t target_row, const EmbeddingDataset& ds) {
  const std::size_t rows[] = {target_row};
  return infer_rows(model, rows, ds).front();
}

EvalReport evaluate_attack(const AttackModel& model, const EmbeddingDataset& ds, ReportMeta meta) {
  const auto rows = ds.rows_in(Split::kAttackEval);
  if (rows.empty()) throw PreconditionError("attack_eval split is empty");
  const auto truth = labels_of(rows, ds);
  const auto results = infer_rows(model, rows, ds);
  std::vector<double> evidence;
  Bits decisions;
  for (const auto& r : results) {
    evidence.push_back(r.evidence);
    decisions.push_back(r.member ? 1 : 0);
  }
  if (meta.attack.empty()) meta.attack = to_string(model.spec);
  return make_report(evidence, decisions, truth, std::move(meta));
}

void save_attack_model(const AttackModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(kCheckpointMagic), 4);
  binary::put<std::uint16_t>(out, kCheckpointVersion);
  binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(model.spec.kind));
  binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(model.spec.u_variant));
  binary::put<double>(out, model.threshold);
  binary::put<std::uint64_t>(out, model.seed);
  binary::put<std::uint64_t>(out, model.options.hidden_width);
  binary::put<std::uint64_t>(out, model.options.hidden_layers);
  binary::put<double>(out, model.options.triplet_margin);
  binary::put<std::uint64_t>(out, model.options.triplet_negatives);
  binary::put<std::uint8_t>(out, model.net ? 1 : 0);
  if (model.net) tinynet::write_network(out, *model.net);
  binary::put<std::uint8_t>(out, model.selector ? 1 : 0);
  if (model.selector) tinynet::write_network(out, *model.selector);
  binary::put<std::uint8_t>(out, model.refs ? 1 : 0);
  if (model.refs) {
    binary::put<std::uint64_t>(out, model.refs->seed);
    binary::put<double>(out, model.refs->fraction);
    binary::put<std::uint64_t>(out, model.refs->size());
    for (auto row : model.refs->row_ids) binary::put<std::uint64_t>(out, row);
  }
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.loss_curve.size()));
  for (double l : model.loss_curve) binary::put<double>(out, l);
  if (!out) throw IoError("write failed for " + path.string());
}

AttackModel load_attack_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic)) {
    throw FormatError("not an attack checkpoint: " + path.string());
  }
  if (binary::get<std::uint16_t>(in) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  AttackModel model;
  const auto kind = binary::get<std::uint8_t>(in);
  const auto variant = binary::get<std::uint8_t>(in);
  if (kind > 4 || (variant != 0 && variant != 2 && variant != 4)) throw FormatError("checkpoint: bad attack kind");
  model.spec = {static_cast<AttackKind>(kind), static_cast<UVariant>(variant)};
  model.threshold = binary::get<double>(in);
  model.seed = binary::get<std::uint64_t>(in);
  model.options.hidden_width = binary::get<std::uint64_t>(in);
  model.options.hidden_layers = binary::get<std::uint64_t>(in);
  model.options.triplet_margin = binary::get<double>(in);
  model.options.triplet_negatives = binary::get<std::uint64_t>(in);
  if (binary::get<std::uint8_t>(in)) model.net = tinynet::read_network(in);
  if (binary::get<std::uint8_t>(in)) model.selector = tinynet::read_network(in);
  if (binary::get<std::uint8_t>(in)) {
    ReferenceSet refs;
    refs.seed = binary::get<std::uint64_t>(in);
    refs.fraction = binary::get<double>(in);
    const auto n = binary::get<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw FormatError("checkpoint: implausible anchor count");
    refs.row_ids.resize(n);
    for (auto& row : refs.row_ids) row = binary::get<std::uint64_t>(in);
    model.refs = std::move(refs);
  }
  const auto curve = binary::get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < curve; ++i) model.loss_curve.push_back(binary::get<double>(in));
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return model;
}

}  // namespace simmia
