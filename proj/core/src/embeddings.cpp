#include "vivecap/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "jsonl.hpp"

namespace vivecap::cluster {
namespace {

using Kind = EmbeddingError::Kind;

constexpr char kMagic[4] = {'V', 'C', 'E', '1'};

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Format: return "Format";
    case Kind::DimensionMismatch: return "DimensionMismatch";
    case Kind::NonFinite: return "NonFinite";
    case Kind::DuplicateId: return "DuplicateId";
    case Kind::Empty: return "Empty";
  }
  return "Unknown";
}

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

EmbeddingMatrix load_jsonl(const std::filesystem::path& path) {
  std::vector<std::string> ids;
  std::vector<float> values;
  std::size_t dim = 0;
  detail::for_each_jsonl(
      path,
      [&](std::size_t, const nlohmann::json& j) {
        std::size_t row = ids.size();
        if (!j.is_object() || !j.contains("id") || !j.at("id").is_string() || !j.contains("vec") ||
            !j.at("vec").is_array())
          throw EmbeddingError(Kind::Format, row, {}, "expected {\"id\": string, \"vec\": [numbers]}");
        std::string id = j.at("id").get<std::string>();
        const auto& vec = j.at("vec");
        if (row == 0) dim = vec.size();
        if (vec.size() != dim || dim == 0)
          throw EmbeddingError(Kind::DimensionMismatch, row, id,
                               "vector has " + std::to_string(vec.size()) + " entries, expected " + std::to_string(dim));
        for (const auto& v : vec) {
          if (!v.is_number()) throw EmbeddingError(Kind::NonFinite, row, id, "vector entry is not a number");
          values.push_back(v.get<float>());
        }
        ids.push_back(std::move(id));
      },
      [](std::size_t line, const std::string& msg) {
        throw EmbeddingError(Kind::Format, line - 1, {}, msg);
      });
  return EmbeddingMatrix(std::move(ids), std::move(values), dim);
}

EmbeddingMatrix load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open embeddings");
  ByteReader r(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));
  if (!r.has(12)) throw EmbeddingError(Kind::Format, 0, {}, "file too short for header");
  std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw EmbeddingError(Kind::Format, 0, {}, "bad magic, expected VCE1");
  std::uint32_t n = r.u32();
  std::uint32_t d = r.u32();
  if (d == 0) throw EmbeddingError(Kind::DimensionMismatch, 0, {}, "dimension is zero");
  std::vector<std::string> ids;
  std::vector<float> values;
  ids.reserve(n);
  values.reserve(static_cast<std::size_t>(n) * d);
  for (std::uint32_t row = 0; row < n; ++row) {
    if (!r.has(2)) throw EmbeddingError(Kind::Format, row, {}, "truncated record header");
    std::uint16_t len = r.u16();
    if (!r.has(len)) throw EmbeddingError(Kind::Format, row, {}, "truncated id");
    std::string id = r.str(len);
    if (!r.has(static_cast<std::size_t>(d) * 4))
      throw EmbeddingError(Kind::DimensionMismatch, row, id, "record shorter than the declared dimension");
    for (std::uint32_t k = 0; k < d; ++k) values.push_back(r.f32());
    ids.push_back(std::move(id));
  }
  if (!r.at_end()) throw EmbeddingError(Kind::Format, n, {}, "trailing bytes after the declared records");
  return EmbeddingMatrix(std::move(ids), std::move(values), d);
}

}  // namespace

EmbeddingError::EmbeddingError(Kind kind, std::size_t row, std::string id, const std::string& detail)
    : Error(std::string(kind_name(kind)) + " at row " + std::to_string(row) + (id.empty() ? "" : " (" + id + ")") +
            ": " + detail),
      kind_(kind),
      row_(row),
      id_(std::move(id)) {}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::vector<float> values, std::size_t dim)
    : ids_(std::move(ids)), values_(std::move(values)), dim_(dim) {
  if (ids_.empty()) throw EmbeddingError(Kind::Empty, 0, {}, "no embeddings");
  if (dim_ == 0 || values_.size() != ids_.size() * dim_)
    throw EmbeddingError(Kind::DimensionMismatch, 0, {}, "value count does not match rows x dim");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) throw EmbeddingError(Kind::DuplicateId, i, ids_[i], "id repeats");
    for (float v : row(i))
      if (!std::isfinite(v)) throw EmbeddingError(Kind::NonFinite, i, ids_[i], "NaN or infinite entry");
  }
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  return format == EmbeddingFormat::Jsonl ? load_jsonl(path) : load_binary(path);
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write embeddings");
  if (format == EmbeddingFormat::Jsonl) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      nlohmann::ordered_json j;
      j["id"] = m.ids()[i];
      auto r = m.row(i);
      j["vec"] = std::vector<float>(r.begin(), r.end());
      out << j.dump() << '\n';
    }
    return;
  }
  std::string buf(kMagic, 4);
  put_u32(buf, static_cast<std::uint32_t>(m.rows()));
  put_u32(buf, static_cast<std::uint32_t>(m.dim()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const std::string& id = m.ids()[i];
    if (id.size() > 0xffff) throw EmbeddingError(Kind::Format, i, id, "id longer than 65535 bytes");
    buf.push_back(static_cast<char>(id.size() & 0xff));
    buf.push_back(static_cast<char>(id.size() >> 8));
    buf += id;
    for (float v : m.row(i)) put_u32(buf, std::bit_cast<std::uint32_t>(v));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

EmbeddingFormat parse_embedding_format(const std::string& name) {
  if (name == "jsonl") return EmbeddingFormat::Jsonl;
  if (name == "binary") return EmbeddingFormat::Binary;
  throw Error("unknown embedding format: " + name + " (expected jsonl or binary)");
}

}  // namespace vivecap::cluster
