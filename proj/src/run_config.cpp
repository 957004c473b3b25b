#include "cbir/run_config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <stdexcept>

#include <json.hpp>

namespace cbir {

namespace {

template <typename T>
T parse_number(std::string_view token, const char* what) {
  while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
  while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
  T value{};
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), last, value);
  if (token.empty() || ec != std::errc{} || ptr != last) {
    throw std::invalid_argument(std::string("invalid ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_commas(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find(',', start);
    const auto end = pos == std::string_view::npos ? text.size() : pos;
    out.push_back(text.substr(start, end - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (k_values.empty()) {
    throw std::invalid_argument("k_values must not be empty");
  }
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] == 0) {
      throw std::invalid_argument("k_values must be positive");
    }
    if (i > 0 && k_values[i] <= k_values[i - 1]) {
      throw std::invalid_argument("k_values must be strictly ascending");
    }
  }
}

std::vector<std::uint32_t> RunConfig::resolve_queries(std::uint32_t corpus_count) const {
  if (!query_rows) {
    std::vector<std::uint32_t> all(corpus_count);
    for (std::uint32_t i = 0; i < corpus_count; ++i) all[i] = i;
    return all;
  }
  for (const auto row : *query_rows) {
    if (row >= corpus_count) {
      throw std::out_of_range("query row " + std::to_string(row) + " outside corpus of " +
                              std::to_string(corpus_count));
    }
  }
  return *query_rows;
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  for (const auto token : split_commas(text)) {
    ks.push_back(parse_number<std::size_t>(token, "k value"));
  }
  return ks;
}

std::optional<std::vector<std::uint32_t>> parse_query_rows(const std::string& text) {
  if (text == "all") return std::nullopt;
  std::vector<std::uint32_t> rows;
  for (const auto token : split_commas(text)) {
    const auto dash = token.find('-');
    if (dash != std::string_view::npos && dash > 0) {
      const auto first = parse_number<std::uint32_t>(token.substr(0, dash), "query row");
      const auto last = parse_number<std::uint32_t>(token.substr(dash + 1), "query row");
      if (last < first) {
        throw std::invalid_argument("descending query range '" + std::string(token) + "'");
      }
      for (auto r = first; r <= last; ++r) rows.push_back(r);
    } else {
      rows.push_back(parse_number<std::uint32_t>(token, "query row"));
    }
  }
  return rows;
}

RunConfig read_run_config(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw std::invalid_argument("config must be a JSON object");
  }

  RunConfig cfg;
  try {
    if (doc.contains("embeddings_path")) cfg.embeddings_path = doc["embeddings_path"].get<std::string>();
    if (doc.contains("labels_path")) cfg.labels_path = doc["labels_path"].get<std::string>();
    if (doc.contains("metric")) cfg.metric = parse_metric(doc["metric"].get<std::string>());
    if (doc.contains("k_values")) cfg.k_values = doc["k_values"].get<std::vector<std::size_t>>();
    if (doc.contains("query_rows")) {
      const auto& q = doc["query_rows"];
      if (q.is_string()) {
        cfg.query_rows = parse_query_rows(q.get<std::string>());
      } else {
        cfg.query_rows = q.get<std::vector<std::uint32_t>>();
      }
    }
    if (doc.contains("self_match")) cfg.self_match = parse_self_match(doc["self_match"].get<std::string>());
    if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("model_tag")) cfg.model_tag = doc["model_tag"].get<std::string>();
    if (doc.contains("threads")) cfg.threads = doc["threads"].get<unsigned>();
    if (doc.contains("allow_vacuous")) cfg.allow_vacuous = doc["allow_vacuous"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config field has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config " + path.string());
  }
  return read_run_config(in);
}

}  // namespace cbir
