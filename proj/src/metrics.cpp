#include "cbir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace cbir {

namespace {

void require_positive_k(std::size_t k) {
  if (k == 0) {
    throw std::invalid_argument("k must be positive");
  }
}

double ideal_dcg(std::size_t ones) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ones; ++i) {
    acc += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return acc;
}

}  // namespace

RelevanceVector relevance_vector(const RankedResult& result, int query_label, const LabelTable& labels) {
  RelevanceVector rel;
  rel.reserve(result.neighbors.size());
  for (const auto& n : result.neighbors) {
    if (n.id >= labels.size()) {
      throw MetricsError("neighbor id " + std::to_string(n.id) + " has no label (table holds " +
                         std::to_string(labels.size()) + " rows)");
    }
    rel.push_back(labels.rows[n.id].label == query_label ? 1 : 0);
  }
  return rel;
}

std::size_t relevant_in_top(std::span<const std::uint8_t> rel, std::size_t k) {
  const auto n = std::min(k, rel.size());
  return static_cast<std::size_t>(std::count_if(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(n),
                                                [](std::uint8_t b) { return b != 0; }));
}

double precision_at_k(std::span<const std::uint8_t> rel, std::size_t k) {
  require_positive_k(k);
  const auto denom = std::min(k, rel.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(relevant_in_top(rel, k)) / static_cast<double>(denom);
}

double recall_at_k(std::span<const std::uint8_t> rel, std::size_t k, std::size_t total_relevant) {
  require_positive_k(k);
  if (total_relevant == 0) {
    throw VacuousQuery("recall is undefined: no relevant items exist for this query");
  }
  const auto hits = relevant_in_top(rel, k);
  if (hits > total_relevant) {
    throw MetricsError(std::to_string(hits) + " relevant items retrieved but only " +
                       std::to_string(total_relevant) + " exist");
  }
  return static_cast<double>(hits) / static_cast<double>(total_relevant);
}

double dcg_at_k(std::span<const std::uint8_t> rel, std::size_t k) {
  require_positive_k(k);
  const auto n = std::min(k, rel.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // gain 2^rel - 1 is exactly rel for binary relevance
    if (rel[i] != 0) {
      acc += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  return acc;
}

double ndcg_at_k(std::span<const std::uint8_t> rel, std::size_t k, std::size_t total_relevant) {
  const double dcg = dcg_at_k(rel, k);
  const auto hits = relevant_in_top(rel, k);
  if (hits > total_relevant) {
    throw MetricsError(std::to_string(hits) + " relevant items retrieved but only " +
                       std::to_string(total_relevant) + " exist");
  }
  const double idcg = ideal_dcg(std::min(k, total_relevant));
  if (idcg == 0.0) {
    return 1.0;
  }
  return dcg / idcg;
}

std::string to_string(SelfMatchPolicy policy) {
  return policy == SelfMatchPolicy::include ? "include" : "exclude";
}

SelfMatchPolicy parse_self_match(std::string_view name) {
  if (name == "include") return SelfMatchPolicy::include;
  if (name == "exclude") return SelfMatchPolicy::exclude;
  throw std::invalid_argument("unknown self-match policy '" + std::string(name) +
                              "' (expected include or exclude)");
}

QueryMetrics evaluate_query(const VectorIndex& index, const LabelTable& labels, std::uint32_t query_row,
                            std::size_t k, const EvalOptions& options) {
  require_positive_k(k);
  if (labels.size() != index.count()) {
    throw MetricsError("label table has " + std::to_string(labels.size()) + " rows but the index holds " +
                       std::to_string(index.count()));
  }
  if (query_row >= index.count()) {
    throw std::out_of_range("query row " + std::to_string(query_row) + " outside corpus of " +
                            std::to_string(index.count()));
  }

  const int query_label = labels.label(query_row);
  std::size_t total_relevant = labels.class_size(query_label);

  RankedResult result;
  if (options.policy == SelfMatchPolicy::include) {
    result = index.search_row(query_row, k);
  } else {
    result = index.search_row(query_row, k + 1);
    auto& nb = result.neighbors;
    const auto self = std::find_if(nb.begin(), nb.end(), [&](const Neighbor& n) { return n.id == query_row; });
    if (self != nb.end()) {
      nb.erase(self);
    } else if (nb.size() > k) {
      nb.pop_back();
    }
    if (nb.size() > k) nb.resize(k);
    total_relevant -= 1;
  }

  const auto rel = relevance_vector(result, query_label, labels);

  QueryMetrics m;
  m.query_row = query_row;
  m.k = k;
  m.elapsed = result.elapsed;
  m.precision = precision_at_k(rel, k);
  if (total_relevant == 0) {
    if (!options.allow_vacuous) {
      throw VacuousQuery("query row " + std::to_string(query_row) + " (label " + std::to_string(query_label) +
                         ") has no other relevant item in the corpus");
    }
    m.vacuous = true;
    m.recall = 0.0;
  } else {
    m.recall = recall_at_k(rel, k, total_relevant);
  }
  m.ndcg = ndcg_at_k(rel, k, total_relevant);
  return m;
}

std::size_t EvalReport::vacuous_count() const {
  return static_cast<std::size_t>(
      std::count_if(per_query.begin(), per_query.end(), [](const QueryMetrics& m) { return m.vacuous; }));
}

std::vector<KAggregate> aggregate(std::span<const QueryMetrics> rows, std::span<const std::size_t> k_values) {
  std::vector<KAggregate> out;
  out.reserve(k_values.size());
  for (const auto k : k_values) {
    KAggregate agg;
    agg.k = k;
    double sums[4] = {0.0, 0.0, 0.0, 0.0};
    MetricSummary* summaries[4] = {&agg.precision, &agg.recall, &agg.ndcg, &agg.elapsed_us};
    for (const auto& row : rows) {
      if (row.k != k) continue;
      const double values[4] = {row.precision, row.recall, row.ndcg, row.elapsed_us()};
      for (int j = 0; j < 4; ++j) {
        if (agg.queries == 0) {
          summaries[j]->min = values[j];
          summaries[j]->max = values[j];
        } else {
          summaries[j]->min = std::min(summaries[j]->min, values[j]);
          summaries[j]->max = std::max(summaries[j]->max, values[j]);
        }
        sums[j] += values[j];
      }
      ++agg.queries;
    }
    if (agg.queries > 0) {
      for (int j = 0; j < 4; ++j) {
        summaries[j]->mean = sums[j] / static_cast<double>(agg.queries);
      }
    }
    out.push_back(agg);
  }
  return out;
}

EvalReport sweep(const VectorIndex& index, const LabelTable& labels, std::span<const std::uint32_t> query_rows,
                 std::span<const std::size_t> k_values, const EvalOptions& options) {
  if (k_values.empty()) {
    throw std::invalid_argument("sweep needs at least one k value");
  }
  for (const auto k : k_values) require_positive_k(k);

  EvalReport report;
  report.model_tag = index.stored().source_tag;
  report.metric = to_string(index.metric());
  report.policy = options.policy;

  std::vector<std::uint32_t> queries(query_rows.begin(), query_rows.end());
  std::sort(queries.begin(), queries.end());
  queries.erase(std::unique(queries.begin(), queries.end()), queries.end());
  std::vector<std::size_t> ks(k_values.begin(), k_values.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  report.k_values = ks;

  const auto cells = queries.size() * ks.size();
  report.per_query.resize(cells);

  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(cells, 1)));

  const auto run = [&](std::size_t cell) {
    report.per_query[cell] = evaluate_query(index, labels, queries[cell / ks.size()], ks[cell % ks.size()], options);
  };

  if (threads <= 1) {
    for (std::size_t cell = 0; cell < cells; ++cell) run(cell);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> workers;
      for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&, t] {
          try {
            for (std::size_t cell = t; cell < cells; cell += threads) run(cell);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  report.aggregates = aggregate(report.per_query, report.k_values);
  return report;
}

}  // namespace cbir
