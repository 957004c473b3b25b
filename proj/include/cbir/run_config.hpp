#ifndef CBIR_RUN_CONFIG_HPP
#define CBIR_RUN_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cbir/index.hpp"
#include "cbir/metrics.hpp"

namespace cbir {

inline const std::vector<std::size_t> kDefaultKValues{1, 5, 10, 20, 50, 100};

/// Evaluation run description, loadable from JSON and overridable from flags.
struct RunConfig {
  std::filesystem::path embeddings_path;
  std::filesystem::path labels_path;
  Metric metric = Metric::l2();
  std::vector<std::size_t> k_values = kDefaultKValues;
  /// nullopt means every corpus row.
  std::optional<std::vector<std::uint32_t>> query_rows;
  SelfMatchPolicy self_match = SelfMatchPolicy::include;
  std::filesystem::path output_dir = ".";
  std::uint64_t seed = 0;
  /// Report tag; defaults to the embeddings file stem.
  std::string model_tag;
  unsigned threads = 0;
  bool allow_vacuous = false;

  /// Throws std::invalid_argument on an empty, non-positive or non-ascending k list.
  void validate() const;

  std::vector<std::uint32_t> resolve_queries(std::uint32_t corpus_count) const;
};

RunConfig read_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

/// "1,5,10" -> {1,5,10}.
std::vector<std::size_t> parse_k_list(const std::string& text);

/// "all" -> nullopt; "0,1,2" or "0-4" -> explicit rows.
std::optional<std::vector<std::uint32_t>> parse_query_rows(const std::string& text);

}  // namespace cbir

#endif
