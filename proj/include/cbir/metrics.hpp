#ifndef CBIR_METRICS_HPP
#define CBIR_METRICS_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbir/index.hpp"
#include "cbir/interchange.hpp"

namespace cbir {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a query's class has no other member, so recall is 0/0.
class VacuousQuery : public MetricsError {
 public:
  using MetricsError::MetricsError;
};

/// Bit i is 1 iff the i-th retrieved item shares the query's label.
using RelevanceVector = std::vector<std::uint8_t>;

RelevanceVector relevance_vector(const RankedResult& result, int query_label, const LabelTable& labels);

/// Number of relevant items among the first min(k, |rel|).
std::size_t relevant_in_top(std::span<const std::uint8_t> rel, std::size_t k);

/// Divides by min(k, |rel|) when fewer than k items were retrieved.
double precision_at_k(std::span<const std::uint8_t> rel, std::size_t k);
double recall_at_k(std::span<const std::uint8_t> rel, std::size_t k, std::size_t total_relevant);
double dcg_at_k(std::span<const std::uint8_t> rel, std::size_t k);

/// DCG@k over the ideal DCG of min(k, total_relevant) leading ones.
/// Returns 1.0 for a query with nothing relevant and nothing retrieved.
double ndcg_at_k(std::span<const std::uint8_t> rel, std::size_t k, std::size_t total_relevant);

enum class SelfMatchPolicy { include, exclude };

std::string to_string(SelfMatchPolicy policy);
SelfMatchPolicy parse_self_match(std::string_view name);

struct QueryMetrics {
  std::uint32_t query_row = 0;
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  std::chrono::nanoseconds elapsed{0};
  bool vacuous = false;

  double elapsed_us() const { return std::chrono::duration<double, std::micro>(elapsed).count(); }
  double elapsed_s() const { return std::chrono::duration<double>(elapsed).count(); }
};

struct EvalOptions {
  SelfMatchPolicy policy = SelfMatchPolicy::include;
  /// Emit vacuous rows (flagged) instead of throwing VacuousQuery.
  bool allow_vacuous = false;
  /// Worker threads for sweep(); 0 = hardware concurrency.
  unsigned threads = 1;
};

QueryMetrics evaluate_query(const VectorIndex& index, const LabelTable& labels, std::uint32_t query_row,
                            std::size_t k, const EvalOptions& options = {});

struct MetricSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct KAggregate {
  std::size_t k = 0;
  std::size_t queries = 0;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary ndcg;
  MetricSummary elapsed_us;
};

struct EvalReport {
  std::string model_tag;
  std::string metric;
  SelfMatchPolicy policy = SelfMatchPolicy::include;
  std::vector<std::size_t> k_values;
  /// Sorted by query_row, then k.
  std::vector<QueryMetrics> per_query;
  /// One entry per k, in k_values order.
  std::vector<KAggregate> aggregates;

  std::size_t vacuous_count() const;
};

/// Mean/min/max per k, computed from per_query in row order.
std::vector<KAggregate> aggregate(std::span<const QueryMetrics> rows, std::span<const std::size_t> k_values);

EvalReport sweep(const VectorIndex& index, const LabelTable& labels, std::span<const std::uint32_t> query_rows,
                 std::span<const std::size_t> k_values, const EvalOptions& options = {});

void write_report_json(const EvalReport& report, std::ostream& out);
EvalReport read_report_json(std::istream& in);

/// Columns: query,k,precision,recall,ndcg,search_time_s (seconds to 6 decimals).
void write_report_csv(const EvalReport& report, std::ostream& out);

/// Fixed-width per-k aggregate table for terminals.
void write_aggregate_table(const EvalReport& report, std::ostream& out);

/// Long-format per-model, per-k means: model,k,mean_precision,mean_recall,mean_ndcg,mean_search_time_s.
void write_comparison_csv(std::span<const EvalReport> reports, std::ostream& out);

/// Four-panel SVG line chart (precision, recall, NDCG, search time against k), one line per model.
void write_comparison_svg(std::span<const EvalReport> reports, std::ostream& out);

}  // namespace cbir

#endif
