// Test-only reference implementations. Nothing here calls into the code under
// test; every routine is the slow, obvious version.
#ifndef CBIR_TESTS_ORACLES_HPP
#define CBIR_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "cbir/interchange.hpp"

namespace cbir::testing {

inline EmbeddingSet random_set(std::uint32_t count, std::uint32_t dim, std::uint64_t seed, float lo = -1.0f,
                               float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  EmbeddingSet set;
  set.count = count;
  set.dim = dim;
  set.data.resize(static_cast<std::size_t>(count) * dim);
  for (auto& v : set.data) v = dist(rng);
  return set;
}

/// Rows normalized in double then rounded to float.
inline EmbeddingSet unit_rows(EmbeddingSet set) {
  for (std::uint32_t i = 0; i < set.count; ++i) {
    double norm = 0.0;
    for (std::uint32_t j = 0; j < set.dim; ++j) {
      const double v = set.data[i * set.dim + j];
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::uint32_t j = 0; j < set.dim; ++j) {
      set.data[i * set.dim + j] = static_cast<float>(set.data[i * set.dim + j] / norm);
    }
  }
  return set;
}

/// Scores every row in double and fully sorts: ascending for L2 (with sqrt), descending for IP.
inline std::vector<std::pair<std::uint32_t, double>> full_sort_search(const EmbeddingSet& corpus,
                                                                      const std::vector<float>& query, bool l2,
                                                                      std::size_t k) {
  std::vector<std::pair<std::uint32_t, double>> all;
  for (std::uint32_t i = 0; i < corpus.count; ++i) {
    double acc = 0.0;
    for (std::uint32_t j = 0; j < corpus.dim; ++j) {
      const double a = query[j];
      const double b = corpus.data[static_cast<std::size_t>(i) * corpus.dim + j];
      acc += l2 ? (a - b) * (a - b) : a * b;
    }
    all.emplace_back(i, l2 ? std::sqrt(acc) : acc);
  }
  std::sort(all.begin(), all.end(), [l2](const auto& x, const auto& y) {
    if (x.second != y.second) return l2 ? x.second < y.second : x.second > y.second;
    return x.first < y.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

/// Eigenvalues of a symmetric matrix (row-major n x n) by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, std::size_t n) {
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (at(p, q) == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
  std::sort(eig.rbegin(), eig.rend());
  return eig;
}

/// Sample covariance (N - 1 denominator) of row-major n x d data, in long double.
inline std::vector<double> sample_covariance(const std::vector<double>& x, std::size_t n, std::size_t d) {
  std::vector<long double> mean(d, 0.0L);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[i * d + j];
  for (auto& m : mean) m /= static_cast<long double>(n);
  std::vector<double> cov(d * d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      long double acc = 0.0L;
      for (std::size_t i = 0; i < n; ++i) acc += (x[i * d + a] - mean[a]) * (x[i * d + b] - mean[b]);
      cov[a * d + b] = static_cast<double>(acc / static_cast<long double>(n - 1));
    }
  }
  return cov;
}

/// sum_{i < len} 1 / log2(i + 2) where rel[i] = 1, in long double.
inline long double dcg_reference(const std::vector<int>& rel) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel[i]) acc += 1.0L / std::log2(static_cast<long double>(i) + 2.0L);
  }
  return acc;
}

}  // namespace cbir::testing

#endif
