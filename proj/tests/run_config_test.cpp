#include <gtest/gtest.h>

#include <sstream>

#include "cbir/run_config.hpp"

namespace cbir {
namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return read_run_config(in);
}

TEST(RunConfig, DefaultsWhenFieldsAbsent) {
  const auto cfg = parse("{}");
  EXPECT_EQ(cfg.k_values, kDefaultKValues);
  EXPECT_EQ(cfg.metric, Metric::l2());
  EXPECT_EQ(cfg.self_match, SelfMatchPolicy::include);
  EXPECT_FALSE(cfg.query_rows.has_value());
  EXPECT_EQ(cfg.resolve_queries(4), (std::vector<std::uint32_t>{0, 1, 2, 3}));
}

TEST(RunConfig, ReadsEveryField) {
  const auto cfg = parse(R"({
    "embeddings_path": "e.emb", "labels_path": "l.csv", "metric": "cosine",
    "k_values": [1, 5], "query_rows": "0-4", "self_match": "exclude",
    "output_dir": "out", "seed": 7, "model_tag": "resnet50", "threads": 2,
    "allow_vacuous": true})");
  EXPECT_EQ(cfg.embeddings_path, "e.emb");
  EXPECT_EQ(cfg.metric, Metric::cosine());
  EXPECT_EQ(cfg.k_values, (std::vector<std::size_t>{1, 5}));
  EXPECT_EQ(*cfg.query_rows, (std::vector<std::uint32_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(cfg.self_match, SelfMatchPolicy::exclude);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.model_tag, "resnet50");
  EXPECT_EQ(cfg.threads, 2u);
  EXPECT_TRUE(cfg.allow_vacuous);

  EXPECT_EQ(*parse(R"({"query_rows": [3, 1]})").query_rows, (std::vector<std::uint32_t>{3, 1}));
}

TEST(RunConfig, RejectsBadInput) {
  EXPECT_THROW(parse("not json"), std::invalid_argument);
  EXPECT_THROW(parse("[1]"), std::invalid_argument);
  EXPECT_THROW(parse(R"({"k_values": []})"), std::invalid_argument);
  EXPECT_THROW(parse(R"({"k_values": [5, 1]})"), std::invalid_argument);
  EXPECT_THROW(parse(R"({"k_values": [0, 1]})"), std::invalid_argument);
  EXPECT_THROW(parse(R"({"metric": "hamming"})"), std::invalid_argument);
  EXPECT_THROW(parse(R"({"seed": "x"})"), std::invalid_argument);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), std::invalid_argument);
}

TEST(RunConfig, QueryRowsOutsideCorpus) {
  RunConfig cfg;
  cfg.query_rows = std::vector<std::uint32_t>{0, 9};
  EXPECT_THROW(cfg.resolve_queries(5), std::out_of_range);
}

TEST(Parsing, KListAndQueryRows) {
  EXPECT_EQ(parse_k_list("1,5,10"), (std::vector<std::size_t>{1, 5, 10}));
  EXPECT_THROW(parse_k_list("1,x"), std::invalid_argument);
  EXPECT_FALSE(parse_query_rows("all").has_value());
  EXPECT_EQ(*parse_query_rows("0,2,5-7"), (std::vector<std::uint32_t>{0, 2, 5, 6, 7}));
  EXPECT_THROW(parse_query_rows("4-2"), std::invalid_argument);
}

}  // namespace
}  // namespace cbir
