#ifndef SIMMIA_EMBEDDING_STORE_HPP
#define SIMMIA_EMBEDDING_STORE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace simmia {

enum class Split : std::uint8_t {
  kAttackTrain = 0,
  kAttackEval = 1,
  kReferencePool = 2,
  kUnlabeled = 3,
};

std::string_view to_string(Split split);
// Accepts the names produced by to_string; throws FormatError otherwise.
Split parse_split(std::string_view name);

// One exported embedding. Vectors are stored at container precision (f32);
// every computation widens to double.
struct EmbeddingRecord {
  std::uint64_t row_id = 0;
  std::vector<float> vector;
  std::optional<std::int32_t> identity;
  std::optional<bool> membership;  // true = member of the target training set
  Split split = Split::kUnlabeled;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct EmbeddingDataset {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;  // records[i].row_id == i
  std::string provenance;

  bool operator==(const EmbeddingDataset&) const = default;

  std::size_t size() const { return records.size(); }
  const EmbeddingRecord& operator[](std::size_t row) const { return records[row]; }

  bool has_identities() const;
  bool has_membership() const;
  // Number of distinct identities k (identities are dense in [0, k)).
  std::size_t num_identities() const;
  // Row ids carrying the given split tag, ascending.
  std::vector<std::size_t> rows_in(Split split) const;

  // Throws FormatError naming the first offending row.
  void validate() const;
};

enum class DatasetFormat { kContainer, kCsv, kJsonl };

DatasetFormat parse_format(std::string_view name);
// Guesses from the file extension (.csv, .jsonl, anything else = container).
DatasetFormat format_from_extension(const std::filesystem::path& path);

EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

// Writes the EMB1 container.
void save_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path);
void save_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path,
                  DatasetFormat format);

// In-memory container codec; save/load are thin wrappers around these.
std::vector<std::uint8_t> encode_container(const EmbeddingDataset& ds);
EmbeddingDataset decode_container(std::span<const std::uint8_t> bytes);

struct SplitCounts {
  std::size_t attack_train_members = 0;
  std::size_t attack_train_nonmembers = 0;
  std::size_t attack_eval_members = 0;
  std::size_t attack_eval_nonmembers = 0;
  std::size_t reference_pool = 0;
};

// Re-tags every record: attack splits are drawn without replacement from the
// labeled member / non-member populations, the reference pool from whatever
// remains, and everything else becomes unlabeled. Deterministic in `seed`.
EmbeddingDataset assign_splits(const EmbeddingDataset& ds, const SplitCounts& counts,
                               std::uint64_t seed);

}  // namespace simmia

#endif  // SIMMIA_EMBEDDING_STORE_HPP
