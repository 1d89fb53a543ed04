#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vivecap/error.hpp"

namespace vivecap::cluster {

class EmbeddingError : public Error {
 public:
  enum class Kind { Format, DimensionMismatch, NonFinite, DuplicateId, Empty };

  EmbeddingError(Kind kind, std::size_t row, std::string id, const std::string& detail);

  Kind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  const std::string& id() const noexcept { return id_; }

 private:
  Kind kind_;
  std::size_t row_;
  std::string id_;
};

/// n x d row-major matrix of finite 32-bit floats, one row per frame id.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Throws EmbeddingError when the value count is not ids.size() * dim, an
  /// entry is NaN/Inf, or an id repeats.
  EmbeddingMatrix(std::vector<std::string> ids, std::vector<float> values, std::size_t dim);

  std::size_t rows() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const float> values() const noexcept { return values_; }

 private:
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::size_t dim_ = 0;
};

enum class EmbeddingFormat { Jsonl, Binary };

/// JSONL: {"id": "...", "vec": [...]} per line.
/// Binary (little-endian): "VCE1", u32 n, u32 d, then n x (u16 id length,
/// id bytes, d x f32).
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format);

EmbeddingFormat parse_embedding_format(const std::string& name);

}  // namespace vivecap::cluster
