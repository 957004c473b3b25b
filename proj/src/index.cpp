#include "cbir/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <thread>

#include <json.hpp>

namespace cbir {

namespace {

void require_same_dim(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch(a.size(), b.size());
  }
}

double squared_norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) {
    acc += static_cast<double>(x) * static_cast<double>(x);
  }
  return acc;
}

}  // namespace

std::string to_string(const Metric& metric) {
  if (metric.kind == MetricKind::l2) return "l2";
  return metric.normalized ? "cosine" : "ip";
}

Metric parse_metric(std::string_view name) {
  if (name == "l2") return Metric::l2();
  if (name == "ip") return Metric::inner_product();
  if (name == "cosine") return Metric::cosine();
  throw std::invalid_argument("unknown metric '" + std::string(name) + "' (expected l2, ip or cosine)");
}

double l2_distance(std::span<const float> a, std::span<const float> b) {
  require_same_dim(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

double inner_product(std::span<const float> a, std::span<const float> b) {
  require_same_dim(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

std::vector<float> normalize(std::span<const float> v) {
  const double norm = std::sqrt(squared_norm(v));
  if (!(norm >= kDegenerateNorm)) {
    throw DegenerateVector("cannot normalize a vector with norm " + std::to_string(norm));
  }
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
  }
  return out;
}

VectorIndex VectorIndex::build(const EmbeddingSet& set, Metric metric) {
  check_embeddings(set);
  if (metric.kind == MetricKind::l2 && metric.normalized) {
    throw std::invalid_argument("L2 metric cannot be normalized");
  }

  EmbeddingSet stored;
  stored.count = set.count;
  stored.dim = set.dim;
  stored.source_tag = set.source_tag;
  if (!metric.normalized) {
    stored.data = set.data;
    return VectorIndex(std::move(stored), metric);
  }

  stored.data.reserve(set.data.size());
  for (std::uint32_t i = 0; i < set.count; ++i) {
    std::vector<float> unit;
    try {
      unit = normalize(set.row(i));
    } catch (const DegenerateVector&) {
      throw DegenerateVector("row " + std::to_string(i) + " has zero norm and cannot be normalized");
    }
    stored.data.insert(stored.data.end(), unit.begin(), unit.end());
  }
  return VectorIndex(std::move(stored), metric);
}

VectorIndex VectorIndex::from_stored(EmbeddingSet stored, Metric metric) {
  check_embeddings(stored);
  if (metric.kind == MetricKind::l2 && metric.normalized) {
    throw std::invalid_argument("L2 metric cannot be normalized");
  }
  if (metric.normalized) {
    for (std::uint32_t i = 0; i < stored.count; ++i) {
      const double norm = std::sqrt(squared_norm(stored.row(i)));
      if (std::abs(norm - 1.0) > 1e-6) {
        throw IndexError("stored row " + std::to_string(i) + " has norm " + std::to_string(norm) +
                         " but the index is declared normalized");
      }
    }
  }
  return VectorIndex(std::move(stored), metric);
}

RankedResult VectorIndex::search(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim()) {
    throw DimensionMismatch(dim(), query.size());
  }
  if (k == 0) {
    throw std::invalid_argument("k must be positive");
  }
  if (!metric_.normalized) {
    return search_prepared(query, k);
  }
  const auto unit = normalize(query);
  return search_prepared(unit, k);
}

RankedResult VectorIndex::search_row(std::uint32_t row, std::size_t k) const {
  if (row >= count()) {
    throw std::out_of_range("query row " + std::to_string(row) + " outside corpus of " +
                            std::to_string(count()));
  }
  if (k == 0) {
    throw std::invalid_argument("k must be positive");
  }
  // Stored rows are already in index form.
  auto result = search_prepared(this->row(row), k);
  result.query_row = row;
  return result;
}

RankedResult VectorIndex::search_prepared(std::span<const float> query, std::size_t k) const {
  const bool ascending = metric_.ascending();
  // "Better" ranks earlier; ties go to the smaller id.
  const auto better = [ascending](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) return ascending ? a.score < b.score : a.score > b.score;
    return a.id < b.id;
  };

  const auto n = count();
  const auto keep = std::min<std::size_t>(k, n);

  RankedResult result;
  const auto start = std::chrono::steady_clock::now();

  // Max-heap on "better": the top is the worst neighbor kept so far.
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(better)> heap(better);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto stored_row = row(i);
    double score = 0.0;
    if (metric_.kind == MetricKind::l2) {
      for (std::size_t j = 0; j < stored_row.size(); ++j) {
        const double d = static_cast<double>(query[j]) - static_cast<double>(stored_row[j]);
        score += d * d;
      }
      score = std::sqrt(score);
    } else {
      for (std::size_t j = 0; j < stored_row.size(); ++j) {
        score += static_cast<double>(query[j]) * static_cast<double>(stored_row[j]);
      }
    }

    const Neighbor candidate{i, score};
    if (heap.size() < keep) {
      heap.push(candidate);
    } else if (keep > 0 && better(candidate, heap.top())) {
      heap.pop();
      heap.push(candidate);
    }
  }

  result.neighbors.resize(heap.size());
  for (auto it = result.neighbors.rbegin(); it != result.neighbors.rend(); ++it) {
    *it = heap.top();
    heap.pop();
  }

  result.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now() - start);
  return result;
}

std::vector<RankedResult> VectorIndex::batch_search(std::span<const std::vector<float>> queries,
                                                    std::size_t k, unsigned threads) const {
  for (const auto& q : queries) {
    if (q.size() != dim()) {
      throw DimensionMismatch(dim(), q.size());
    }
  }
  if (k == 0) {
    throw std::invalid_argument("k must be positive");
  }

  std::vector<RankedResult> results(queries.size());
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, queries.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) {
      results[i] = search(queries[i], k);
    }
    return results;
  }

  // Strided partition; each slot is written by exactly one worker.
  std::vector<std::jthread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < queries.size(); i += threads) {
          results[i] = search(queries[i], k);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  workers.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::filesystem::path index_sidecar_path(const std::filesystem::path& path) {
  auto sidecar = path;
  sidecar += ".json";
  return sidecar;
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
  save_embeddings(index.stored(), path);
  nlohmann::json meta;
  meta["metric"] = index.metric().kind == MetricKind::l2 ? "l2" : "ip";
  meta["normalized"] = index.metric().normalized;
  std::ofstream out(index_sidecar_path(path), std::ios::trunc);
  out << meta.dump(2) << '\n';
  if (!out) {
    throw InterchangeError(InterchangeErrc::io_failure,
                           "failed writing " + index_sidecar_path(path).string());
  }
}

VectorIndex load_index(const std::filesystem::path& path) {
  const auto sidecar = index_sidecar_path(path);
  std::ifstream in(sidecar);
  if (!in) {
    throw InterchangeError(InterchangeErrc::io_failure, "cannot open index sidecar " + sidecar.string());
  }
  Metric metric;
  try {
    const auto meta = nlohmann::json::parse(in);
    const auto kind = meta.at("metric").get<std::string>();
    if (kind == "l2") {
      metric.kind = MetricKind::l2;
    } else if (kind == "ip") {
      metric.kind = MetricKind::inner_product;
    } else {
      throw std::invalid_argument("unknown metric '" + kind + "'");
    }
    metric.normalized = meta.at("normalized").get<bool>();
  } catch (const std::exception& e) {
    throw InterchangeError(InterchangeErrc::bad_header,
                           "malformed index sidecar " + sidecar.string() + ": " + e.what());
  }
  return VectorIndex::from_stored(load_embeddings(path), metric);
}

}  // namespace cbir
