#include "simmia/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <type_traits>
#include <variant>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "simmia/errors.hpp"
#include "simmia/experiments.hpp"
#include "simmia/rng.hpp"
#include "simmia/similarity.hpp"
#include "simmia/stats_analysis.hpp"

namespace simmia::cli {

#ifndef SIMMIA_VERSION
#define SIMMIA_VERSION "0.0.0"
#endif
const char* const kVersion = SIMMIA_VERSION;

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "config bindings assume a 64-bit size_t");

using Field = std::variant<std::string*, double*, std::uint64_t*, bool*, std::vector<std::string>*,
                           std::vector<double>*, std::vector<std::uint64_t>*>;

struct Binding {
  std::string_view section;
  std::string_view key;
  Field field;
};

std::vector<Binding> bindings(RunConfig& c) {
  return {
      {"data", "dataset", &c.dataset},
      {"data", "format", &c.format},
      {"data", "ground_truth", &c.ground_truth},
      {"data", "model", &c.model},
      {"data", "input", &c.input},
      {"data", "input_format", &c.input_format},
      {"data", "emit_format", &c.emit_format},
      {"synth", "k", &c.synth.k},
      {"synth", "dim", &c.synth.dim},
      {"synth", "members", &c.synth.per_identity_members},
      {"synth", "nonmembers", &c.synth.per_identity_nonmembers},
      {"synth", "sigma_train", &c.synth.sigma_train},
      {"synth", "sigma_test", &c.synth.sigma_test},
      {"synth", "center_scale", &c.synth.center_scale},
      {"synth", "seed", &c.synth.seed},
      {"split", "attack_train_members", &c.split.attack_train_members},
      {"split", "attack_train_nonmembers", &c.split.attack_train_nonmembers},
      {"split", "attack_eval_members", &c.split.attack_eval_members},
      {"split", "attack_eval_nonmembers", &c.split.attack_eval_nonmembers},
      {"split", "reference_pool", &c.split.reference_pool},
      {"split", "seed", &c.split_seed},
      {"reference", "fraction", &c.fraction},
      {"reference", "seed", &c.ref_seed},
      {"reference", "allow_attack_overlap", &c.allow_attack_overlap},
      {"reference", "target_split", &c.target_split},
      {"attack", "kinds", &c.kinds},
      {"attack", "hidden_width", &c.options.hidden_width},
      {"attack", "hidden_layers", &c.options.hidden_layers},
      {"attack", "triplet_margin", &c.options.triplet_margin},
      {"attack", "triplet_negatives", &c.options.triplet_negatives},
      {"train", "learning_rate", &c.learning_rate},
      {"train", "epochs", &c.epochs},
      {"train", "batch_size", &c.batch_size},
      {"train", "optimizer", &c.optimizer},
      {"train", "seed", &c.train_seed},
      {"experiment", "seeds", &c.seeds},
      {"experiment", "fractions", &c.fractions},
      {"experiment", "kernel", &c.kernel},
      {"experiment", "threads", &c.threads},
  };
}

[[noreturn]] void bad_key(std::string_view section, std::string_view key, const std::string& why) {
  throw UsageError("config: " + std::string(section) + "." + std::string(key) + ": " + why);
}

std::uint64_t toml_unsigned(const toml::node& node, std::string_view section, std::string_view key) {
  const auto v = node.value<std::int64_t>();
  if (!node.is_integer() || !v || *v < 0) bad_key(section, key, "expected a non-negative integer");
  return static_cast<std::uint64_t>(*v);
}

double toml_real(const toml::node& node, std::string_view section, std::string_view key) {
  if (!node.is_number()) bad_key(section, key, "expected a number");
  return *node.value<double>();
}

void assign(const toml::node& node, const Binding& b) {
  std::visit(
      [&](auto* target) {
        using T = std::remove_pointer_t<decltype(target)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (!node.is_string()) bad_key(b.section, b.key, "expected a string");
          *target = *node.value<std::string>();
        } else if constexpr (std::is_same_v<T, double>) {
          *target = toml_real(node, b.section, b.key);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          *target = toml_unsigned(node, b.section, b.key);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!node.is_boolean()) bad_key(b.section, b.key, "expected a boolean");
          *target = *node.value<bool>();
        } else {
          const auto* arr = node.as_array();
          if (arr == nullptr) bad_key(b.section, b.key, "expected an array");
          target->clear();
          for (const auto& item : *arr) {
            if constexpr (std::is_same_v<T, std::vector<std::string>>) {
              if (!item.is_string()) bad_key(b.section, b.key, "expected strings");
              target->push_back(*item.value<std::string>());
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
              target->push_back(toml_real(item, b.section, b.key));
            } else {
              target->push_back(toml_unsigned(item, b.section, b.key));
            }
          }
        }
      },
      b.field);
}

json field_json(const Field& f) {
  return std::visit([](auto* target) { return json(*target); }, f);
}

// Collects written files so the manifest can hash them.
class OutputDir {
 public:
  explicit OutputDir(const RunConfig& cfg) : root_(cfg.output) {
    if (root_.empty()) throw UsageError("an output directory is required (-o)");
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw IoError("cannot create " + root_.string() + ": " + ec.message());
  }

  fs::path path(const std::string& name) {
    const fs::path p = root_ / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    return p;
  }

  void write(const std::string& name, const std::string& contents) {
    std::ofstream out(path(name), std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out) throw IoError("write failed for " + (root_ / name).string());
  }

  const fs::path& root() const { return root_; }
  std::vector<std::string> files() const {
    auto f = files_;
    std::sort(f.begin(), f.end());
    return f;
  }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_manifest(OutputDir& dir, const std::string& command, const RunConfig& cfg, const json& seeds,
                    const std::vector<std::string>& inputs) {
  const std::string config = canonical_config(cfg);
  json m;
  m["tool"] = "simmia";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_digest"] = sha256_hex(config);
  m["seeds"] = seeds;
  m["config"] = json::parse(config);
  json in = json::array();
  for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_hex(read_file(p))}});
  m["inputs"] = in;
  json out = json::array();
  for (const auto& name : dir.files()) {
    const auto bytes = read_file(dir.root() / name);
    out.push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  m["artifacts"] = out;
  std::ofstream f(dir.root() / "manifest.json", std::ios::binary | std::ios::trunc);
  f << m.dump(2) << "\n";
  if (!f) throw IoError("cannot write manifest");
}

DatasetFormat resolve_format(const std::string& name, const std::string& path) {
  return name == "auto" ? format_from_extension(path) : parse_format(name);
}

EmbeddingDataset load_input(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw UsageError("a dataset is required (--dataset)");
  if (!fs::exists(cfg.dataset)) throw IoError("dataset not found: " + cfg.dataset);
  return load_dataset(cfg.dataset, resolve_format(cfg.format, cfg.dataset));
}

std::vector<AttackSpec> parsed_kinds(const RunConfig& cfg) {
  std::vector<AttackSpec> out;
  for (const auto& k : cfg.kinds) out.push_back(parse_attack(k));
  if (out.empty()) throw ArgumentError("no attack kinds given");
  return out;
}

bool any_needs_anchors(const std::vector<AttackSpec>& kinds) {
  return std::any_of(kinds.begin(), kinds.end(),
                     [](const AttackSpec& s) { return s.kind == AttackKind::kSd || s.kind == AttackKind::kAsSd; });
}

ReferenceOptions ref_options(const RunConfig& cfg) { return {cfg.allow_attack_overlap}; }

std::string bits_cell(const std::optional<bool>& b) { return b ? (*b ? "1" : "0") : ""; }

// Throws UsageError for anything the command line or config got wrong, before
// any data is touched.
void validate_config(const std::string& command, const RunConfig& cfg) {
  try {
    cfg.attack_config().train.validate();
    for (const auto& k : cfg.kinds) parse_attack(k);
    parse_kernel(cfg.kernel);
    parse_split(cfg.target_split);
    for (const auto* f : {&cfg.format, &cfg.input_format}) {
      if (*f != "auto") parse_format(*f);
    }
    parse_format(cfg.emit_format);
    if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) throw ArgumentError("reference fraction must lie in (0, 1]");
    for (double f : cfg.fractions) {
      if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("sweep fractions must lie in (0, 1]");
    }
    if (cfg.seeds.empty()) throw ArgumentError("at least one seed is required");
    if (cfg.threads == 0) throw ArgumentError("threads must be positive");
    if (command == "synth") cfg.synth.validate();
    if (command == "train-attack" && cfg.kinds.size() != 1) throw ArgumentError("train-attack takes exactly one kind");
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  OutputDir dir(cfg);
  const auto [ds, gt] = generate(cfg.synth);
  save_dataset(ds, dir.path("dataset.emb1"));
  save_dataset(ground_truth_dataset(gt), dir.path("ground_truth.emb1"));
  write_manifest(dir, "synth", cfg, {{"synth", cfg.synth.seed}}, {});
  out << "wrote " << ds.size() << " rows (k=" << cfg.synth.k << ", dim=" << cfg.synth.dim << ") to "
      << dir.root().string() << "\n";
  return kExitOk;
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  if (cfg.input.empty()) throw UsageError("ingest needs --input");
  if (!fs::exists(cfg.input)) throw IoError("input not found: " + cfg.input);
  const auto ds = load_dataset(cfg.input, resolve_format(cfg.input_format, cfg.input));
  OutputDir dir(cfg);
  const auto fmt = parse_format(cfg.emit_format);
  const char* name = fmt == DatasetFormat::kCsv ? "dataset.csv" : fmt == DatasetFormat::kJsonl ? "dataset.jsonl"
                                                                                                : "dataset.emb1";
  save_dataset(ds, dir.path(name), fmt);
  write_manifest(dir, "ingest", cfg, json::object(), {cfg.input});
  out << "ingested " << ds.size() << " rows of dimension " << ds.dim << "\n";
  return kExitOk;
}

int cmd_split(const RunConfig& cfg, std::ostream& out) {
  const auto ds = assign_splits(load_input(cfg), cfg.split, cfg.split_seed);
  OutputDir dir(cfg);
  save_dataset(ds, dir.path("dataset.emb1"));
  std::string counts = "split,rows\n";
  for (auto s : {Split::kAttackTrain, Split::kAttackEval, Split::kReferencePool, Split::kUnlabeled}) {
    counts += std::string(to_string(s)) + "," + std::to_string(ds.rows_in(s).size()) + "\n";
  }
  dir.write("split_counts.csv", counts);
  write_manifest(dir, "split", cfg, {{"split", cfg.split_seed}}, {cfg.dataset});
  out << counts;
  return kExitOk;
}

int cmd_simvec(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_input(cfg);
  const auto refs = sample_reference_set(ds, cfg.fraction, cfg.ref_seed, ref_options(cfg));
  const auto rows = ds.rows_in(parse_split(cfg.target_split));
  if (rows.empty()) throw PreconditionError("split " + cfg.target_split + " is empty");
  const auto dm = distance_matrix(rows, refs, ds, static_cast<unsigned>(cfg.threads));
  OutputDir dir(cfg);
  std::string csv = "row_id,membership";
  for (std::size_t j = 0; j < refs.size(); ++j) csv += ",a" + std::to_string(j);
  csv += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += std::to_string(rows[i]) + "," + bits_cell(ds[rows[i]].membership);
    for (Eigen::Index j = 0; j < dm.cols(); ++j) csv += "," + format_double(dm(static_cast<Eigen::Index>(i), j));
    csv += "\n";
  }
  dir.write("simvec.csv", csv);
  std::string anchors = "anchor,row_id\n";
  for (std::size_t j = 0; j < refs.size(); ++j) anchors += std::to_string(j) + "," + std::to_string(refs.row_ids[j]) + "\n";
  dir.write("anchors.csv", anchors);
  write_manifest(dir, "simvec", cfg, {{"reference", cfg.ref_seed}}, {cfg.dataset});
  out << "wrote " << rows.size() << " x " << refs.size() << " similarity matrix\n";
  return kExitOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_input(cfg);
  const auto refs = sample_reference_set(ds, cfg.fraction, cfg.ref_seed, ref_options(cfg));
  const auto rows = ds.rows_in(parse_split(cfg.target_split));
  if (rows.empty()) throw PreconditionError("split " + cfg.target_split + " is empty");
  Bits membership;
  for (auto r : rows) {
    if (!ds[r].membership) throw PreconditionError("row " + std::to_string(r) + " has no membership label");
    membership.push_back(*ds[r].membership ? 1 : 0);
  }
  const auto dm = distance_matrix(rows, refs, ds, static_cast<unsigned>(cfg.threads));
  OutputDir dir(cfg);
  dir.write("per_reference_stats.csv", per_reference_stats_csv(per_reference_stats(dm, membership)));

  const auto means = row_means(dm);
  const auto stds = row_stds(dm);
  std::string cdf = "statistic,group,value,cumulative_fraction\n";
  for (const auto& [stat, values] : {std::pair{"mean", &means}, std::pair{"std", &stds}}) {
    for (int group = 1; group >= 0; --group) {
      std::vector<double> picked;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (membership[i] == group) picked.push_back((*values)[i]);
      }
      for (const auto& p : stat_cdf(picked)) {
        cdf += std::string(stat) + "," + (group ? "member" : "nonmember") + "," + format_double(p.value) + "," +
               format_double(p.cumulative_fraction) + "\n";
      }
    }
  }
  dir.write("cdf.csv", cdf);
  const auto gap = gap_summary(dm, membership);
  const std::string gap_csv = "statistic,gap_auc\nmean," + format_double(gap.mean_gap_auc) + "\nstd," +
                              format_double(gap.std_gap_auc) + "\n";
  dir.write("gap.csv", gap_csv);
  write_manifest(dir, "stats", cfg, {{"reference", cfg.ref_seed}}, {cfg.dataset});
  out << gap_csv;
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_input(cfg);
  const auto spec = parse_attack(cfg.kinds.front());
  std::optional<ReferenceSet> refs;
  if (any_needs_anchors({spec})) refs = sample_reference_set(ds, cfg.fraction, cfg.ref_seed, ref_options(cfg));
  const auto model = train_attack(spec, ds, refs ? &*refs : nullptr, cfg.attack_config());
  OutputDir dir(cfg);
  save_attack_model(model, dir.path("model.atk"));
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < model.loss_curve.size(); ++e) {
    loss += std::to_string(e + 1) + "," + format_double(model.loss_curve[e]) + "\n";
  }
  dir.write("loss.csv", loss);
  write_manifest(dir, "train-attack", cfg, {{"train", cfg.train_seed}, {"reference", cfg.ref_seed}}, {cfg.dataset});
  out << "trained " << to_string(spec);
  if (refs) out << " on " << refs->size() << " anchors";
  if (!model.loss_curve.empty()) out << ", final loss " << format_double(model.loss_curve.back());
  if (spec.kind == AttackKind::kTloss) out << ", threshold " << format_double(model.threshold);
  out << "\n";
  return kExitOk;
}

void write_report(OutputDir& dir, const std::string& prefix, const EvalReport& report) {
  dir.write(prefix + "report.txt", report_text(report));
  dir.write(prefix + "report.json", report_json(report));
  dir.write(prefix + "roc.csv", roc_csv(report.roc));
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  if (cfg.model.empty()) throw UsageError("eval needs --model");
  if (!fs::exists(cfg.model)) throw IoError("model not found: " + cfg.model);
  const auto ds = load_input(cfg);
  const auto model = load_attack_model(cfg.model);
  if (model.refs) check_reference_set(*model.refs, ds);
  ReportMeta meta{to_string(model.spec), {model.seed}, sha256_hex(canonical_config(cfg))};
  const auto report = evaluate_attack(model, ds, meta);
  OutputDir dir(cfg);
  write_report(dir, "", report);
  write_manifest(dir, "eval", cfg, {{"model", model.seed}}, {cfg.dataset, cfg.model});
  out << report_text(report);
  return kExitOk;
}

ExperimentConfig experiment_config(const RunConfig& cfg) {
  ExperimentConfig ec;
  ec.attack = cfg.attack_config();
  ec.seeds = cfg.seeds;
  ec.config_digest = sha256_hex(canonical_config(cfg));
  return ec;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_input(cfg);
  const auto kinds = parsed_kinds(cfg);
  std::optional<ReferenceSet> refs;
  if (any_needs_anchors(kinds)) refs = sample_reference_set(ds, cfg.fraction, cfg.ref_seed, ref_options(cfg));
  const auto table = compare_attacks(ds, refs ? &*refs : nullptr, kinds, experiment_config(cfg));
  OutputDir dir(cfg);
  const auto text = comparison_text(table);
  dir.write("comparison.txt", text);
  dir.write("comparison.csv", comparison_csv(table));
  for (const auto& row : table.rows) {
    for (std::size_t s = 0; s < row.reports.size(); ++s) {
      dir.write("roc/" + to_string(row.spec) + "_seed" + std::to_string(cfg.seeds[s]) + ".csv",
                roc_csv(row.reports[s].roc));
    }
  }
  write_manifest(dir, "compare", cfg, {{"experiment", cfg.seeds}, {"reference", cfg.ref_seed}}, {cfg.dataset});
  out << text;
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_input(cfg);
  const auto kinds = parsed_kinds(cfg);
  const auto table = fraction_sweep(ds, cfg.fractions, kinds, experiment_config(cfg), cfg.ref_seed, ref_options(cfg));
  OutputDir dir(cfg);
  const auto text = sweep_text(table);
  dir.write("sweep.txt", text);
  dir.write("sweep.csv", sweep_csv(table));
  write_manifest(dir, "sweep", cfg, {{"experiment", cfg.seeds}, {"reference", cfg.ref_seed}}, {cfg.dataset});
  out << text;
  return kExitOk;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out) {
  if (cfg.ground_truth.empty()) throw UsageError("oracle needs --ground-truth");
  if (!fs::exists(cfg.ground_truth)) throw IoError("ground truth not found: " + cfg.ground_truth);
  const auto ds = load_input(cfg);
  const auto gt = ground_truth_from_dataset(load_dataset(cfg.ground_truth, DatasetFormat::kContainer));
  auto report = oracle_threshold_attack(ds, gt, parse_kernel(cfg.kernel));
  report.meta.config_digest = sha256_hex(canonical_config(cfg));
  OutputDir dir(cfg);
  write_report(dir, "", report);
  write_manifest(dir, "oracle", cfg, json::object(), {cfg.dataset, cfg.ground_truth});
  out << report_text(report);
  return kExitOk;
}

std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--config", "TOML run configuration");
  sub->add_option("-o,--output", cfg.output, "Output directory");
  sub->add_option("--threads", cfg.threads, "Worker threads for distance computation");
}

void add_dataset(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--dataset", cfg.dataset, "Embedding dataset");
  sub->add_option("--format", cfg.format, "container | csv | jsonl | auto");
}

void add_reference(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--fraction", cfg.fraction, "Fraction of the reference pool used as anchors");
  sub->add_option("--ref-seed", cfg.ref_seed, "Anchor sampling seed");
  sub->add_flag("--allow-attack-overlap", cfg.allow_attack_overlap, "Draw anchors from every row");
}

void add_training(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--epochs", cfg.epochs);
  sub->add_option("--lr", cfg.learning_rate);
  sub->add_option("--batch-size", cfg.batch_size);
  sub->add_option("--optimizer", cfg.optimizer, "adam | sgd");
  sub->add_option("--hidden-width", cfg.options.hidden_width);
  sub->add_option("--hidden-layers", cfg.options.hidden_layers);
  sub->add_option("--margin", cfg.options.triplet_margin, "Triplet margin");
  sub->add_option("--negatives", cfg.options.triplet_negatives, "Triplet negatives per target");
}

}  // namespace

AttackTrainConfig RunConfig::attack_config() const {
  AttackTrainConfig c;
  c.train.learning_rate = learning_rate;
  c.train.epochs = static_cast<int>(std::min<std::uint64_t>(epochs, 1u << 30));
  c.train.batch_size = batch_size;
  c.train.optimizer = tinynet::parse_optimizer(optimizer);
  c.train.seed = train_seed;
  c.options = options;
  return c;
}

void load_config_file(const fs::path& path, RunConfig& cfg) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + std::string(e.description()));
  }
  const auto binds = bindings(cfg);
  for (const auto& [section_key, node] : root) {
    const std::string section(section_key.str());
    if (section == "output") {
      if (!node.is_string()) bad_key("", "output", "expected a string");
      cfg.output = *node.value<std::string>();
      continue;
    }
    const auto* table = node.as_table();
    if (table == nullptr) throw UsageError("config: unknown top-level key '" + section + "'");
    for (const auto& [key, value] : *table) {
      const auto it = std::find_if(binds.begin(), binds.end(),
                                   [&](const Binding& b) { return b.section == section && b.key == key.str(); });
      if (it == binds.end()) throw UsageError("config: unknown key " + section + "." + std::string(key.str()));
      assign(value, *it);
    }
  }
}

std::string canonical_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  json j = json::object();
  for (const auto& b : bindings(copy)) j[std::string(b.section)][std::string(b.key)] = field_json(b.field);
  return j.dump();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Similarity-distribution membership inference toolkit", "simmia"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic embedding dataset and its ground truth");
  add_common(synth, cfg);
  synth->add_option("--k", cfg.synth.k, "Identities");
  synth->add_option("--dim", cfg.synth.dim, "Embedding dimension");
  synth->add_option("--members", cfg.synth.per_identity_members, "Members per identity");
  synth->add_option("--nonmembers", cfg.synth.per_identity_nonmembers, "Non-members per identity");
  synth->add_option("--sigma-train", cfg.synth.sigma_train);
  synth->add_option("--sigma-test", cfg.synth.sigma_test);
  synth->add_option("--center-scale", cfg.synth.center_scale);
  synth->add_option("--seed", cfg.synth.seed);

  auto* ingest = app.add_subcommand("ingest", "Validate an embedding file and convert it");
  add_common(ingest, cfg);
  ingest->add_option("--input", cfg.input, "File to ingest");
  ingest->add_option("--input-format", cfg.input_format, "container | csv | jsonl | auto");
  ingest->add_option("--emit-format", cfg.emit_format, "container | csv | jsonl");

  auto* split = app.add_subcommand("split", "Assign attack_train / attack_eval / reference_pool tags");
  add_common(split, cfg);
  add_dataset(split, cfg);
  split->add_option("--attack-train-members", cfg.split.attack_train_members);
  split->add_option("--attack-train-nonmembers", cfg.split.attack_train_nonmembers);
  split->add_option("--attack-eval-members", cfg.split.attack_eval_members);
  split->add_option("--attack-eval-nonmembers", cfg.split.attack_eval_nonmembers);
  split->add_option("--reference-pool", cfg.split.reference_pool);
  split->add_option("--seed", cfg.split_seed);

  auto* simvec = app.add_subcommand("simvec", "Dump the target-by-anchor distance matrix");
  auto* stats = app.add_subcommand("stats", "Per-anchor statistics, CDFs and gap AUCs");
  for (auto* sub : {simvec, stats}) {
    add_common(sub, cfg);
    add_dataset(sub, cfg);
    add_reference(sub, cfg);
    sub->add_option("--split", cfg.target_split, "Target split");
  }

  auto* train = app.add_subcommand("train-attack", "Train one attack model and save its checkpoint");
  add_common(train, cfg);
  add_dataset(train, cfg);
  add_reference(train, cfg);
  add_training(train, cfg);
  std::string kind;
  train->add_option("--kind", kind, "sd | as_sd | fe | tloss | u_low | u_mid | u_high");
  train->add_option("--seed", cfg.train_seed, "Training seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a saved attack on attack_eval");
  add_common(eval, cfg);
  add_dataset(eval, cfg);
  eval->add_option("--model", cfg.model, "Attack checkpoint");

  auto* compare = app.add_subcommand("compare", "Compare attacks over several seeds");
  auto* sweep = app.add_subcommand("sweep", "Retrain anchor attacks over reference fractions");
  for (auto* sub : {compare, sweep}) {
    add_common(sub, cfg);
    add_dataset(sub, cfg);
    add_reference(sub, cfg);
    add_training(sub, cfg);
    sub->add_option("--kinds", cfg.kinds, "Attack kinds")->delimiter(',');
    sub->add_option("--seeds", cfg.seeds, "Training seeds")->delimiter(',');
  }
  sweep->add_option("--fractions", cfg.fractions, "Reference fractions")->delimiter(',');

  auto* oracle = app.add_subcommand("oracle", "Known-center threshold attack on synthetic data");
  add_common(oracle, cfg);
  add_dataset(oracle, cfg);
  oracle->add_option("--ground-truth", cfg.ground_truth, "Ground-truth sidecar");
  oracle->add_option("--kernel", cfg.kernel, "gaussian | inverse_distance");

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-' && app.get_subcommand_no_throw(args.front()) == nullptr) {
    err << "simmia: unknown subcommand '" << args.front() << "'\n" << app.help();
    return kExitUsage;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  std::string command;
  try {
    if (const auto path = find_config_arg(args)) {
      if (!fs::exists(*path)) throw UsageError("config not found: " + *path);
      load_config_file(*path, cfg);
    }
    app.parse(reversed);
    command = app.get_subcommands().front()->get_name();
    if (!kind.empty()) cfg.kinds = {kind};
    validate_config(command, cfg);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "simmia: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "simmia: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (command == "synth") return cmd_synth(cfg, out);
    if (command == "ingest") return cmd_ingest(cfg, out);
    if (command == "split") return cmd_split(cfg, out);
    if (command == "simvec") return cmd_simvec(cfg, out);
    if (command == "stats") return cmd_stats(cfg, out);
    if (command == "train-attack") return cmd_train(cfg, out);
    if (command == "eval") return cmd_eval(cfg, out);
    if (command == "compare") return cmd_compare(cfg, out);
    if (command == "sweep") return cmd_sweep(cfg, out);
    if (command == "oracle") return cmd_oracle(cfg, out);
  } catch (const TrainingError& e) {
    err << "simmia: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const UsageError& e) {
    err << "simmia: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "simmia: " << e.what() << "\n";
    return kExitData;
  }
  err << "simmia: unknown command\n";
  return kExitUsage;
}

}  // namespace simmia::cli
