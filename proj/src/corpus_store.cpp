#include "wchamfer/corpus_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wchamfer/errors.hpp"

namespace wchamfer {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'S', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

class BinReader {
 public:
  BinReader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

  template <typename T>
  T read(const char* what) {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) {
      throw domain_error("unexpected end of file reading " + std::string(what) +
                         " at byte " + std::to_string(offset_) + " in " + path_);
    }
    offset_ += sizeof(T);
    return value;
  }

  void read_bytes(void* dst, std::size_t n, const char* what) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) {
      throw domain_error("unexpected end of file reading " + std::string(what) +
                         " at byte " + std::to_string(offset_) + " in " + path_);
    }
    offset_ += n;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t offset_ = 0;
};

double row_norm(std::span<const float> row) {
  double sum = 0.0;
  for (float x : row) {
    const double v = static_cast<double>(x);
    sum += v * v;
  }
  return std::sqrt(sum);
}

bool row_finite(std::span<const float> row) {
  for (float x : row) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

const MultiVecRecord* EmbeddingStore::find(const std::string& item_id) const {
  auto it = index_.find(item_id);
  return it == index_.end() ? nullptr : &records[it->second];
}

const MultiVecRecord& EmbeddingStore::at(const std::string& item_id) const {
  const MultiVecRecord* rec = find(item_id);
  if (rec == nullptr) {
    throw domain_error("item not found in store: " + item_id);
  }
  return *rec;
}

void EmbeddingStore::add(MultiVecRecord rec) {
  if (index_.count(rec.item_id) != 0) {
    throw domain_error("duplicate item_id: " + rec.item_id);
  }
  if (rec.dim != dim) {
    throw domain_error("dimension mismatch for item " + rec.item_id + ": record dim " +
                       std::to_string(rec.dim) + " vs store dim " + std::to_string(dim));
  }
  index_.emplace(rec.item_id, records.size());
  records.push_back(std::move(rec));
}

EmbeddingStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw io_error("cannot open store file: " + path);
  }
  BinReader r(in, path);

  char magic[4];
  r.read_bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw domain_error("malformed header: bad magic in " + path);
  }
  const auto version = r.read<std::uint32_t>("format version");
  if (version != kFormatVersion) {
    throw domain_error("malformed header: unsupported format version " +
                       std::to_string(version) + " in " + path);
  }

  EmbeddingStore store;
  store.dim = r.read<std::uint32_t>("dim");
  store.vocab.size = r.read<std::uint32_t>("vocab_size");
  const auto record_count = r.read<std::uint64_t>("record_count");

  for (std::uint64_t i = 0; i < record_count; ++i) {
    const std::size_t record_offset = r.offset();
    MultiVecRecord rec;
    rec.dim = store.dim;

    const auto id_len = r.read<std::uint16_t>("item_id length");
    rec.item_id.resize(id_len);
    if (id_len > 0) r.read_bytes(rec.item_id.data(), id_len, "item_id");

    const auto token_count = r.read<std::uint32_t>("token_count");
    if (token_count == 0) {
      throw domain_error("empty record (0 tokens) for item " + rec.item_id +
                         " at byte " + std::to_string(record_offset) + " in " + path);
    }
    rec.token_ids.resize(token_count);
    r.read_bytes(rec.token_ids.data(), token_count * sizeof(TokenId), "token_ids");
    for (TokenId t : rec.token_ids) {
      if (t >= store.vocab.size) {
        throw domain_error("token id " + std::to_string(t) + " out of range (T=" +
                           std::to_string(store.vocab.size) + ") for item " +
                           rec.item_id + " at byte " + std::to_string(record_offset) +
                           " in " + path);
      }
    }

    rec.vectors.resize(static_cast<std::size_t>(token_count) * store.dim);
    r.read_bytes(rec.vectors.data(), rec.vectors.size() * sizeof(float), "vectors");
    for (std::size_t row = 0; row < token_count; ++row) {
      const auto v = rec.row(row);
      if (!row_finite(v)) {
        throw domain_error("non-finite value in row " + std::to_string(row) +
                           " of item " + rec.item_id + " at byte " +
                           std::to_string(record_offset) + " in " + path);
      }
      const double norm = row_norm(v);
      if (std::abs(norm - 1.0) > kUnitNormTol) {
        std::ostringstream msg;
        msg << "norm out of tolerance: row " << row << " of item " << rec.item_id
            << " has L2 norm " << norm << " at byte " << record_offset << " in "
            << path;
        throw domain_error(msg.str());
      }
    }

    if (store.contains(rec.item_id)) {
      throw domain_error("duplicate item_id " + rec.item_id + " at byte " +
                         std::to_string(record_offset) + " in " + path);
    }
    store.add(std::move(rec));
  }
  return store;
}

void save_store(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw io_error("cannot open store file for writing: " + path);
  }
  auto put = [&out](const void* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  };

  put(kMagic, sizeof(kMagic));
  put(&kFormatVersion, sizeof(kFormatVersion));
  put(&store.dim, sizeof(store.dim));
  put(&store.vocab.size, sizeof(store.vocab.size));
  const std::uint64_t record_count = store.records.size();
  put(&record_count, sizeof(record_count));

  for (const MultiVecRecord& rec : store.records) {
    if (rec.item_id.size() > 0xFFFF) {
      throw domain_error("item_id too long to serialize: " + rec.item_id);
    }
    const std::uint16_t id_len = static_cast<std::uint16_t>(rec.item_id.size());
    put(&id_len, sizeof(id_len));
    put(rec.item_id.data(), id_len);
    const std::uint32_t token_count = static_cast<std::uint32_t>(rec.token_ids.size());
    put(&token_count, sizeof(token_count));
    put(rec.token_ids.data(), rec.token_ids.size() * sizeof(TokenId));
    put(rec.vectors.data(), rec.vectors.size() * sizeof(float));
  }
  out.flush();
  if (!out) {
    throw io_error("write failed: " + path);
  }
}

ValidationReport validate_store(const EmbeddingStore& store) {
  ValidationReport report;
  auto flag = [&report](const std::string& item_id, const char* kind,
                        std::string detail) {
    report.violations.push_back({item_id, kind, std::move(detail)});
  };

  for (const MultiVecRecord& rec : store.records) {
    if (rec.dim != store.dim) {
      flag(rec.item_id, "dimension-mismatch",
           "record dim " + std::to_string(rec.dim) + " vs store dim " +
               std::to_string(store.dim));
      continue;
    }
    if (rec.token_ids.empty()) {
      flag(rec.item_id, "empty-record", "record has no tokens");
      continue;
    }
    const std::size_t expected = rec.token_ids.size() * store.dim;
    if (rec.vectors.size() != expected) {
      flag(rec.item_id, "length-mismatch",
           std::to_string(rec.token_ids.size()) + " tokens but " +
               std::to_string(rec.vectors.size()) + " floats (want " +
               std::to_string(expected) + ")");
      continue;
    }
    for (TokenId t : rec.token_ids) {
      if (t >= store.vocab.size) {
        flag(rec.item_id, "token-out-of-range",
             "token id " + std::to_string(t) + " >= T=" +
                 std::to_string(store.vocab.size));
      }
    }
    for (std::size_t row = 0; row < rec.token_ids.size(); ++row) {
      const auto v = rec.row(row);
      if (!row_finite(v)) {
        flag(rec.item_id, "non-finite-value", "row " + std::to_string(row));
        continue;
      }
      const double norm = row_norm(v);
      if (std::abs(norm - 1.0) > kUnitNormTol) {
        std::ostringstream detail;
        detail << "row " << row << " L2 norm " << norm;
        flag(rec.item_id, "norm-out-of-tolerance", detail.str());
      }
    }
  }

  for (TokenId t : store.vocab.special_ids) {
    if (t >= store.vocab.size) {
      flag("", "special-token-out-of-range",
           "special id " + std::to_string(t) + " >= T=" +
               std::to_string(store.vocab.size));
    }
  }
  return report;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const Violation& v : violations) {
    out << (v.item_id.empty() ? "<store>" : v.item_id) << ": " << v.kind << " ("
        << v.detail << ")\n";
  }
  return out.str();
}

std::vector<TokenizedDoc> load_tokenized(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open tokenized corpus: " + path);
  }
  std::vector<TokenizedDoc> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw domain_error("malformed tokenized line " + std::to_string(line_no) +
                         " in " + path + " (want item_id<TAB>tokens)");
    }
    TokenizedDoc doc;
    doc.item_id = line.substr(0, tab);
    std::istringstream rest(line.substr(tab + 1));
    long long id = 0;
    while (rest >> id) {
      if (id < 0) {
        throw domain_error("negative token id on line " + std::to_string(line_no) +
                           " in " + path);
      }
      doc.tokens.push_back(static_cast<TokenId>(id));
    }
    if (!rest.eof()) {
      throw domain_error("non-numeric token on line " + std::to_string(line_no) +
                         " in " + path);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_tokenized(std::span<const TokenizedDoc> docs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw io_error("cannot open tokenized corpus for writing: " + path);
  }
  for (const TokenizedDoc& doc : docs) {
    out << doc.item_id << '\t';
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      if (i > 0) out << ' ';
      out << doc.tokens[i];
    }
    out << '\n';
  }
  out.flush();
  if (!out) {
    throw io_error("write failed: " + path);
  }
}

}  // namespace wchamfer
