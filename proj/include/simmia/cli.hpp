#ifndef SIMMIA_CLI_HPP
#define SIMMIA_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "simmia/attacks.hpp"
#include "simmia/embedding_store.hpp"
#include "simmia/synth_gen.hpp"

namespace simmia::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Everything a run can be configured with. Loaded from a TOML file, then
// overridden by command-line flags.
struct RunConfig {
  std::string output;

  std::string dataset;
  std::string format = "auto";  // container | csv | jsonl | auto
  std::string ground_truth;
  std::string model;
  std::string input;
  std::string input_format = "auto";
  std::string emit_format = "container";

  SynthConfig synth;

  SplitCounts split{2000, 2000, 2000, 2000, 1000};
  std::uint64_t split_seed = 0;

  double fraction = 0.1;
  std::uint64_t ref_seed = 0;
  bool allow_attack_overlap = false;
  std::string target_split = "attack_eval";

  std::vector<std::string> kinds{"sd"};
  AttackOptions options;

  double learning_rate = 1e-3;
  std::uint64_t epochs = 100;
  std::uint64_t batch_size = 128;
  std::string optimizer = "adam";
  std::uint64_t train_seed = 0;

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> fractions{0.01, 0.04, 0.2, 1.0};
  std::string kernel = "inverse_distance";
  std::uint64_t threads = 1;

  AttackTrainConfig attack_config() const;
};

// Reads a TOML file into cfg. Unknown keys and wrong types throw UsageError.
void load_config_file(const std::filesystem::path& path, RunConfig& cfg);

// Canonical JSON of every field except the output directory; the SHA-256 of
// this string is the config digest.
std::string canonical_config(const RunConfig& cfg);

std::string sha256_hex(std::string_view bytes);

extern const char* const kVersion;

// Entry point of the `simmia` binary. Diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace simmia::cli

#endif  // SIMMIA_CLI_HPP
