#ifndef CBIR_INDEX_HPP
#define CBIR_INDEX_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbir/interchange.hpp"

/**
 * @file index.hpp
 *
 * @brief Exact flat indices with L2 or inner-product scoring.
 *
 * Every query is scored against every stored row. Scores are accumulated in
 * double precision in row order, so results do not depend on the thread that
 * ran them or on the size of the batch.
 */

namespace cbir {

class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public IndexError {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : IndexError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                   std::to_string(got)),
        expected_(expected),
        got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

class DegenerateVector : public IndexError {
 public:
  using IndexError::IndexError;
};

enum class MetricKind { l2, inner_product };

struct Metric {
  MetricKind kind = MetricKind::l2;
  /// Only meaningful for inner_product: rows and queries are unit-normalized (cosine).
  bool normalized = false;

  static constexpr Metric l2() { return {MetricKind::l2, false}; }
  static constexpr Metric inner_product() { return {MetricKind::inner_product, false}; }
  static constexpr Metric cosine() { return {MetricKind::inner_product, true}; }

  /// Lower scores rank first for L2, higher first for inner product.
  constexpr bool ascending() const { return kind == MetricKind::l2; }

  friend constexpr bool operator==(const Metric&, const Metric&) = default;
};

/// "l2", "ip" or "cosine".
std::string to_string(const Metric& metric);
Metric parse_metric(std::string_view name);

/// Norms below this are treated as zero by normalize().
inline constexpr double kDegenerateNorm = 1e-12;

double l2_distance(std::span<const float> a, std::span<const float> b);
double inner_product(std::span<const float> a, std::span<const float> b);
std::vector<float> normalize(std::span<const float> v);

struct Neighbor {
  std::uint32_t id = 0;
  double score = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct RankedResult {
  std::optional<std::uint32_t> query_row;
  std::vector<Neighbor> neighbors;
  std::chrono::nanoseconds elapsed{0};

  double elapsed_us() const { return std::chrono::duration<double, std::micro>(elapsed).count(); }
  double elapsed_s() const { return std::chrono::duration<double>(elapsed).count(); }
};

class VectorIndex {
 public:
  /// Throws DegenerateVector naming the row when a normalized metric meets a zero row.
  static VectorIndex build(const EmbeddingSet& set, Metric metric);

  /// Wraps rows that are already stored in index form (e.g. loaded from disk).
  static VectorIndex from_stored(EmbeddingSet stored, Metric metric);

  const Metric& metric() const noexcept { return metric_; }
  std::uint32_t count() const noexcept { return vectors_.count; }
  std::uint32_t dim() const noexcept { return vectors_.dim; }

  /// Stored (possibly normalized) row.
  std::span<const float> row(std::size_t i) const { return vectors_.row(i); }
  const EmbeddingSet& stored() const noexcept { return vectors_; }

  /// Exact top-min(k, count); k = 0 is rejected.
  RankedResult search(std::span<const float> query, std::size_t k) const;

  /// Searches with stored row `row` as the query and records it in query_row.
  RankedResult search_row(std::uint32_t row, std::size_t k) const;

  /// Same output as calling search() per query in order. threads = 0 picks hardware concurrency.
  std::vector<RankedResult> batch_search(std::span<const std::vector<float>> queries, std::size_t k,
                                         unsigned threads = 1) const;

 private:
  VectorIndex(EmbeddingSet vectors, Metric metric) : vectors_(std::move(vectors)), metric_(metric) {}

  RankedResult search_prepared(std::span<const float> query, std::size_t k) const;

  EmbeddingSet vectors_;
  Metric metric_;
};

/// Writes the stored rows as EMB1 plus `<path>.json` holding the metric.
void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);
std::filesystem::path index_sidecar_path(const std::filesystem::path& path);

}  // namespace cbir

#endif
