#include "simmia/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "simmia/errors.hpp"
#include "simmia/rng.hpp"

namespace simmia {

namespace {

constexpr std::uint8_t kMagic[4] = {0x45, 0x4D, 0x42, 0x31};  // "EMB1"
constexpr std::uint16_t kVersion = 1;

constexpr std::uint16_t kHasIdentity = 1u << 0;
constexpr std::uint16_t kHasMembership = 1u << 1;
constexpr std::uint16_t kHasSplit = 1u << 2;
// Extension: trailing u32 length + UTF-8 provenance text.
constexpr std::uint16_t kHasProvenance = 1u << 3;

constexpr std::uint8_t kMembershipAbsent = 255;

std::string row_prefix(std::size_t row) { return "row " + std::to_string(row) + ": "; }

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    if constexpr (std::is_same_v<T, float>) {
      put(std::bit_cast<std::uint32_t>(value));
    } else if constexpr (std::is_same_v<T, double>) {
      put(std::bit_cast<std::uint64_t>(value));
    } else {
      const auto bits = static_cast<std::make_unsigned_t<T>>(value);
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
      }
    }
  }

  void put_bytes(std::span<const std::uint8_t> data) {
    bytes_.insert(bytes_.end(), data.begin(), data.end());
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if constexpr (std::is_same_v<T, float>) {
      return std::bit_cast<float>(get<std::uint32_t>(what));
    } else if constexpr (std::is_same_v<T, double>) {
      return std::bit_cast<double>(get<std::uint64_t>(what));
    } else {
      require(sizeof(T), what);
      std::make_unsigned_t<T> bits = 0;
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i]) << (8 * i);
      }
      pos_ += sizeof(T);
      return static_cast<T>(bits);
    }
  }

  std::span<const std::uint8_t> get_bytes(std::size_t n, const char* what) {
    require(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void require(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated container while reading ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

float parse_component(std::string_view text, std::size_t row) {
  float value = 0.0f;
  if (!parse_number(text, value)) {
    throw FormatError(row_prefix(row) + "cannot parse vector value '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) throw FormatError(row_prefix(row) + "non-finite vector value");
  return value;
}

std::string format_float(float value) {
  char buffer[32];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

// Sorts by row_id and checks ids are exactly [0, n).
void canonicalize_rows(EmbeddingDataset& ds) {
  std::sort(ds.records.begin(), ds.records.end(),
            [](const EmbeddingRecord& a, const EmbeddingRecord& b) { return a.row_id < b.row_id; });
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].row_id != i) {
      throw FormatError("row ids must be unique and dense in [0, n); missing or duplicate id near " +
                        std::to_string(i));
    }
  }
}

EmbeddingDataset load_csv(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "id" || header[1] != "identity" ||
      header[2] != "membership" || header[3] != "split") {
    throw FormatError("malformed CSV header: expected id,identity,membership,split,f0..f{K-1}");
  }
  EmbeddingDataset ds;
  ds.dim = static_cast<std::uint32_t>(header.size() - 4);
  for (std::uint32_t j = 0; j < ds.dim; ++j) {
    if (header[4 + j] != "f" + std::to_string(j)) {
      throw FormatError("malformed CSV header: column " + std::to_string(4 + j) + " should be f" +
                        std::to_string(j));
    }
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError(row_prefix(row) + "dimension mismatch: expected " + std::to_string(ds.dim) +
                        " vector values, got " +
                        std::to_string(cells.size() < 4 ? 0 : cells.size() - 4));
    }
    EmbeddingRecord rec;
    if (!parse_number(cells[0], rec.row_id)) throw FormatError(row_prefix(row) + "bad id");
    if (!cells[1].empty()) {
      std::int32_t identity = 0;
      if (!parse_number(cells[1], identity) || identity < -1) {
        throw FormatError(row_prefix(row) + "bad identity");
      }
      if (identity >= 0) rec.identity = identity;
    }
    if (!cells[2].empty()) {
      if (cells[2] == "1") {
        rec.membership = true;
      } else if (cells[2] == "0") {
        rec.membership = false;
      } else {
        throw FormatError(row_prefix(row) + "membership must be 0, 1 or empty");
      }
    }
    rec.split = cells[3].empty() ? Split::kUnlabeled : parse_split(cells[3]);
    rec.vector.reserve(ds.dim);
    for (std::uint32_t j = 0; j < ds.dim; ++j) rec.vector.push_back(parse_component(cells[4 + j], row));
    ds.records.push_back(std::move(rec));
    ++row;
  }
  canonicalize_rows(ds);
  return ds;
}

EmbeddingDataset load_jsonl(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string line;
  EmbeddingDataset ds;
  bool dim_known = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(row_prefix(row) + "invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw FormatError(row_prefix(row) + "expected a JSON object");
    std::uint32_t count = 0;
    while (obj.contains("f" + std::to_string(count))) ++count;
    if (!dim_known) {
      if (count == 0) throw FormatError(row_prefix(row) + "no vector fields f0..");
      ds.dim = count;
      dim_known = true;
    } else if (count != ds.dim) {
      throw FormatError(row_prefix(row) + "dimension mismatch: expected " + std::to_string(ds.dim) +
                        " vector values, got " + std::to_string(count));
    }
    try {
      EmbeddingRecord rec;
      rec.row_id = obj.at("id").get<std::uint64_t>();
      if (auto it = obj.find("identity"); it != obj.end() && !it->is_null()) {
        const auto identity = it->get<std::int64_t>();
        if (identity < -1 || identity > INT32_MAX) throw FormatError(row_prefix(row) + "bad identity");
        if (identity >= 0) rec.identity = static_cast<std::int32_t>(identity);
      }
      if (auto it = obj.find("membership"); it != obj.end() && !it->is_null()) {
        const auto m = it->is_boolean() ? static_cast<int>(it->get<bool>()) : it->get<int>();
        if (m != 0 && m != 1) throw FormatError(row_prefix(row) + "membership must be 0 or 1");
        rec.membership = (m == 1);
      }
      if (auto it = obj.find("split"); it != obj.end() && !it->is_null()) {
        rec.split = parse_split(it->get<std::string>());
      }
      rec.vector.reserve(ds.dim);
      for (std::uint32_t j = 0; j < ds.dim; ++j) {
        const auto& v = obj.at("f" + std::to_string(j));
        if (!v.is_number()) throw FormatError(row_prefix(row) + "non-numeric vector value");
        const auto value = static_cast<float>(v.get<double>());
        if (!std::isfinite(value)) throw FormatError(row_prefix(row) + "non-finite vector value");
        rec.vector.push_back(value);
      }
      ds.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(row_prefix(row) + e.what());
    }
    ++row;
  }
  if (!dim_known) throw FormatError("empty JSONL file " + path.string());
  canonicalize_rows(ds);
  return ds;
}

std::string encode_csv(const EmbeddingDataset& ds) {
  std::string out = "id,identity,membership,split";
  for (std::uint32_t j = 0; j < ds.dim; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (const auto& rec : ds.records) {
    out += std::to_string(rec.row_id);
    out += ',';
    if (rec.identity) out += std::to_string(*rec.identity);
    out += ',';
    if (rec.membership) out += *rec.membership ? '1' : '0';
    out += ',';
    out += to_string(rec.split);
    for (float v : rec.vector) {
      out += ',';
      out += format_float(v);
    }
    out += '\n';
  }
  return out;
}

std::string encode_jsonl(const EmbeddingDataset& ds) {
  std::string out;
  for (const auto& rec : ds.records) {
    nlohmann::ordered_json obj;
    obj["id"] = rec.row_id;
    obj["identity"] = rec.identity ? nlohmann::ordered_json(*rec.identity) : nlohmann::ordered_json(nullptr);
    obj["membership"] = rec.membership ? nlohmann::ordered_json(*rec.membership ? 1 : 0) : nlohmann::ordered_json(nullptr);
    obj["split"] = to_string(rec.split);
    for (std::uint32_t j = 0; j < ds.dim; ++j) obj["f" + std::to_string(j)] = static_cast<double>(rec.vector[j]);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kAttackTrain:
      return "attack_train";
    case Split::kAttackEval:
      return "attack_eval";
    case Split::kReferencePool:
      return "reference_pool";
    case Split::kUnlabeled:
      return "unlabeled";
  }
  return "unlabeled";
}

Split parse_split(std::string_view name) {
  if (name == "attack_train") return Split::kAttackTrain;
  if (name == "attack_eval") return Split::kAttackEval;
  if (name == "reference_pool") return Split::kReferencePool;
  if (name == "unlabeled") return Split::kUnlabeled;
  throw FormatError("unknown split '" + std::string(name) + "'");
}

bool EmbeddingDataset::has_identities() const {
  return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.identity.has_value(); });
}

bool EmbeddingDataset::has_membership() const {
  return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.membership.has_value(); });
}

std::size_t EmbeddingDataset::num_identities() const {
  std::int32_t max_id = -1;
  for (const auto& r : records) {
    if (r.identity) max_id = std::max(max_id, *r.identity);
  }
  return static_cast<std::size_t>(max_id + 1);
}

std::vector<std::size_t> EmbeddingDataset::rows_in(Split split) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) rows.push_back(i);
  }
  return rows;
}

void EmbeddingDataset::validate() const {
  if (dim == 0) throw FormatError("dataset dimension must be positive");
  const std::size_t k = num_identities();
  std::vector<bool> seen(k, false);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.row_id != i) throw FormatError(row_prefix(i) + "row_id " + std::to_string(r.row_id) + " out of order");
    if (r.vector.size() != dim) {
      throw FormatError(row_prefix(i) + "dimension mismatch: expected " + std::to_string(dim) + ", got " +
                        std::to_string(r.vector.size()));
    }
    for (float v : r.vector) {
      if (!std::isfinite(v)) throw FormatError(row_prefix(i) + "non-finite vector value");
    }
    if (r.identity) {
      if (*r.identity < 0) throw FormatError(row_prefix(i) + "negative identity");
      seen[static_cast<std::size_t>(*r.identity)] = true;
    }
    if ((r.split == Split::kAttackTrain || r.split == Split::kAttackEval) && !r.membership) {
      throw FormatError(row_prefix(i) + "membership is required in split " + std::string(to_string(r.split)));
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (!seen[j]) throw FormatError("identity alphabet is not dense: identity " + std::to_string(j) + " unused");
  }
}

DatasetFormat parse_format(std::string_view name) {
  if (name == "container" || name == "emb") return DatasetFormat::kContainer;
  if (name == "csv") return DatasetFormat::kCsv;
  if (name == "jsonl") return DatasetFormat::kJsonl;
  throw ArgumentError("unknown dataset format '" + std::string(name) + "'");
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return DatasetFormat::kCsv;
  if (ext == ".jsonl") return DatasetFormat::kJsonl;
  return DatasetFormat::kContainer;
}

std::vector<std::uint8_t> encode_container(const EmbeddingDataset& ds) {
  ds.validate();
  const bool has_identity = ds.has_identities();
  const bool has_membership = ds.has_membership();
  const bool has_split = std::any_of(ds.records.begin(), ds.records.end(),
                                     [](const auto& r) { return r.split != Split::kUnlabeled; });
  const bool has_provenance = !ds.provenance.empty();
  std::uint16_t flags = 0;
  if (has_identity) flags |= kHasIdentity;
  if (has_membership) flags |= kHasMembership;
  if (has_split) flags |= kHasSplit;
  if (has_provenance) flags |= kHasProvenance;

  ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint16_t>(flags);
  w.put<std::uint64_t>(ds.size());
  w.put<std::uint32_t>(ds.dim);
  for (const auto& r : ds.records) {
    for (float v : r.vector) w.put<float>(v);
  }
  if (has_identity) {
    for (const auto& r : ds.records) w.put<std::int32_t>(r.identity.value_or(-1));
  }
  if (has_membership) {
    for (const auto& r : ds.records) {
      w.put<std::uint8_t>(r.membership ? static_cast<std::uint8_t>(*r.membership) : kMembershipAbsent);
    }
  }
  if (has_split) {
    for (const auto& r : ds.records) w.put<std::uint8_t>(static_cast<std::uint8_t>(r.split));
  }
  if (has_provenance) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.provenance.size()));
    w.put_bytes({reinterpret_cast<const std::uint8_t*>(ds.provenance.data()), ds.provenance.size()});
  }
  return w.take();
}

EmbeddingDataset decode_container(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.get_bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw FormatError("malformed header: bad magic (expected EMB1)");
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kVersion) throw FormatError("malformed header: unsupported version " + std::to_string(version));
  const auto flags = r.get<std::uint16_t>("flags");
  const auto n = r.get<std::uint64_t>("row count");
  EmbeddingDataset ds;
  ds.dim = r.get<std::uint32_t>("dimension");
  if (ds.dim == 0) throw FormatError("malformed header: dimension 0");
  if (n > bytes.size() / (4ULL * ds.dim) + 1) throw FormatError("malformed header: row count exceeds file size");

  ds.records.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto& rec = ds.records[i];
    rec.row_id = i;
    rec.vector.resize(ds.dim);
    for (std::uint32_t j = 0; j < ds.dim; ++j) {
      rec.vector[j] = r.get<float>("vectors");
      if (!std::isfinite(rec.vector[j])) throw FormatError(row_prefix(i) + "non-finite vector value");
    }
  }
  if (flags & kHasIdentity) {
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto id = r.get<std::int32_t>("identities");
      if (id < -1) throw FormatError(row_prefix(i) + "bad identity " + std::to_string(id));
      if (id >= 0) ds.records[i].identity = id;
    }
  }
  if (flags & kHasMembership) {
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto m = r.get<std::uint8_t>("membership");
      if (m == 0 || m == 1) {
        ds.records[i].membership = (m == 1);
      } else if (m != kMembershipAbsent) {
        throw FormatError(row_prefix(i) + "bad membership byte " + std::to_string(m));
      }
    }
  }
  if (flags & kHasSplit) {
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto s = r.get<std::uint8_t>("split");
      if (s > static_cast<std::uint8_t>(Split::kUnlabeled)) {
        throw FormatError(row_prefix(i) + "bad split byte " + std::to_string(s));
      }
      ds.records[i].split = static_cast<Split>(s);
    }
  }
  if (flags & kHasProvenance) {
    const auto len = r.get<std::uint32_t>("provenance length");
    const auto text = r.get_bytes(len, "provenance");
    ds.provenance.assign(text.begin(), text.end());
  }
  if (!r.at_end()) throw FormatError("trailing bytes after container payload");
  ds.validate();
  return ds;
}

EmbeddingDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  EmbeddingDataset ds;
  switch (format) {
    case DatasetFormat::kContainer:
      return decode_container(read_file(path));
    case DatasetFormat::kCsv:
      ds = load_csv(path);
      break;
    case DatasetFormat::kJsonl:
      ds = load_jsonl(path);
      break;
  }
  ds.validate();
  return ds;
}

void save_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path) {
  save_dataset(ds, path, DatasetFormat::kContainer);
}

void save_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path, DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kContainer: {
      const auto bytes = encode_container(ds);
      write_file(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
      return;
    }
    case DatasetFormat::kCsv:
      ds.validate();
      write_file(path, encode_csv(ds));
      return;
    case DatasetFormat::kJsonl:
      ds.validate();
      write_file(path, encode_jsonl(ds));
      return;
  }
}

EmbeddingDataset assign_splits(const EmbeddingDataset& ds, const SplitCounts& counts, std::uint64_t seed) {
  std::vector<std::size_t> members;
  std::vector<std::size_t> nonmembers;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds[i].membership) continue;
    (*ds[i].membership ? members : nonmembers).push_back(i);
  }
  const std::size_t need_members = counts.attack_train_members + counts.attack_eval_members;
  const std::size_t need_nonmembers = counts.attack_train_nonmembers + counts.attack_eval_nonmembers;
  if (members.size() < need_members) {
    throw CapacityError("need " + std::to_string(need_members) + " members for the attack splits, have " +
                        std::to_string(members.size()) + " (short by " +
                        std::to_string(need_members - members.size()) + ")");
  }
  if (nonmembers.size() < need_nonmembers) {
    throw CapacityError("need " + std::to_string(need_nonmembers) + " non-members for the attack splits, have " +
                        std::to_string(nonmembers.size()) + " (short by " +
                        std::to_string(need_nonmembers - nonmembers.size()) + ")");
  }

  Rng rng(derive_seed(seed, 0x53504c4954ULL));
  rng.shuffle(members);
  rng.shuffle(nonmembers);

  EmbeddingDataset out = ds;
  for (auto& rec : out.records) rec.split = Split::kUnlabeled;
  std::vector<bool> used(ds.size(), false);
  auto take = [&](const std::vector<std::size_t>& from, std::size_t begin, std::size_t count, Split split) {
    for (std::size_t i = begin; i < begin + count; ++i) {
      out.records[from[i]].split = split;
      used[from[i]] = true;
    }
  };
  take(members, 0, counts.attack_train_members, Split::kAttackTrain);
  take(members, counts.attack_train_members, counts.attack_eval_members, Split::kAttackEval);
  take(nonmembers, 0, counts.attack_train_nonmembers, Split::kAttackTrain);
  take(nonmembers, counts.attack_train_nonmembers, counts.attack_eval_nonmembers, Split::kAttackEval);

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!used[i]) rest.push_back(i);
  }
  if (rest.size() < counts.reference_pool) {
    throw CapacityError("need " + std::to_string(counts.reference_pool) + " rows for the reference pool, have " +
                        std::to_string(rest.size()) + " left after the attack splits (short by " +
                        std::to_string(counts.reference_pool - rest.size()) + ")");
  }
  rng.shuffle(rest);
  take(rest, 0, counts.reference_pool, Split::kReferencePool);
  return out;
}

}  // namespace simmia
