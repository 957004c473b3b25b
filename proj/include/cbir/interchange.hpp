#ifndef CBIR_INTERCHANGE_HPP
#define CBIR_INTERCHANGE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/**
 * @file interchange.hpp
 *
 * @brief EMB1 embedding files and the row-aligned label CSV.
 *
 * EMB1 layout (little-endian):
 *
 *     0..3   "EMB1"
 *     4..7   u32 version (1)
 *     8..11  u32 count
 *     12..15 u32 dim
 *     16     u8  dtype (1 = float32)
 *     17..19 zero padding
 *     20..   count * dim float32, row-major
 */

namespace cbir {

inline constexpr std::size_t kEmb1HeaderSize = 20;
inline constexpr std::uint32_t kEmb1Version = 1;
inline constexpr std::uint8_t kEmb1DtypeFloat32 = 1;

/// Largest payload read_embeddings will accept (64 GiB).
inline constexpr std::uint64_t kEmb1MaxPayloadBytes = std::uint64_t{1} << 36;

enum class InterchangeErrc {
  bad_magic,
  unsupported_version,
  unsupported_dtype,
  bad_header,
  truncated,
  trailing_data,
  oversize,
  non_finite,
  io_failure,
  bad_label,
  bad_row_index,
  bad_csv,
};

const char* to_string(InterchangeErrc code);

class InterchangeError : public std::runtime_error {
 public:
  InterchangeError(InterchangeErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  InterchangeErrc code() const noexcept { return code_; }

 private:
  InterchangeErrc code_;
};

/// Row-major matrix of embeddings, one row per image.
struct EmbeddingSet {
  std::uint32_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;
  std::string source_tag;

  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
};

/// Throws InterchangeError when the set breaks its size or finiteness rules.
void check_embeddings(const EmbeddingSet& set);

std::size_t write_embeddings(const EmbeddingSet& set, std::ostream& out);
EmbeddingSet read_embeddings(std::istream& in);

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

/// Loads an EMB1 file; source_tag becomes the file stem.
EmbeddingSet load_embeddings(const std::filesystem::path& path);

/// Parses headerless numeric CSV (one row per line, '#' comments allowed).
EmbeddingSet read_embeddings_csv(std::istream& in);

struct LabelRow {
  std::uint32_t row_index = 0;
  std::string image_id;
  int label = 0;
};

inline constexpr int kMinLabel = 1;
inline constexpr int kMaxLabel = 6;

struct LabelTable {
  std::vector<LabelRow> rows;

  std::size_t size() const { return rows.size(); }
  int label(std::size_t row) const { return rows.at(row).label; }

  /// Number of rows carrying `label`.
  std::size_t class_size(int label) const;
};

LabelTable read_labels(std::istream& in);
void write_labels(const LabelTable& labels, std::ostream& out);

LabelTable load_labels(const std::filesystem::path& path);
void save_labels(const LabelTable& labels, const std::filesystem::path& path);

struct AlignmentReport {
  bool ok = true;
  std::size_t embedding_count = 0;
  std::size_t label_count = 0;

  std::string message() const;
};

AlignmentReport validate_alignment(const EmbeddingSet& set, const LabelTable& labels);

}  // namespace cbir

#endif
