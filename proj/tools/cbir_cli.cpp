// cbir: flat-index retrieval, evaluation and embedding projection.
//
// Exit codes: 0 ok, 1 usage, 2 interchange, 3 evaluation, 4 query, 5 projection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbir/index.hpp"
#include "cbir/interchange.hpp"
#include "cbir/metrics.hpp"
#include "cbir/projection.hpp"
#include "cbir/run_config.hpp"

namespace fs = std::filesystem;
using namespace cbir;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kInterchange = 2,
  kEvaluation = 3,
  kQuery = 4,
  kProjection = 5,
};

struct CommandError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw CommandError{code, message}; }

bool is_emb1(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string_view(magic, 4) == "EMB1";
}

/// EMB1 or headerless numeric CSV, detected by magic bytes.
EmbeddingSet load_any_embeddings(const fs::path& path) {
  if (is_emb1(path)) return load_embeddings(path);
  std::ifstream in(path);
  if (!in) {
    throw InterchangeError(InterchangeErrc::io_failure, "cannot open " + path.string());
  }
  auto set = read_embeddings_csv(in);
  set.source_tag = path.stem().string();
  return set;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    fail(kUsage, "cannot create output directory " + dir.string() + ": " + ec.message());
  }
}

LabelTable load_aligned_labels(const fs::path& path, const EmbeddingSet& set) {
  auto labels = load_labels(path);
  const auto report = validate_alignment(set, labels);
  if (!report.ok) fail(kInterchange, report.message());
  return labels;
}

std::vector<int> label_values(const LabelTable& labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& row : labels.rows) out.push_back(row.label);
  return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string labels;
  std::string out;
  std::string labels_out;
};

int run_ingest(const IngestArgs& a) {
  auto set = load_any_embeddings(a.input);
  check_embeddings(set);
  if (!a.labels.empty()) {
    const auto labels = load_aligned_labels(a.labels, set);
    if (!a.labels_out.empty()) save_labels(labels, a.labels_out);
  }
  save_embeddings(set, a.out);
  std::cout << "ingested " << set.count << " x " << set.dim << " embeddings -> " << a.out << '\n';
  return kOk;
}

struct BuildArgs {
  std::string embeddings;
  std::string metric = "l2";
  std::string out;
};

int run_build(const BuildArgs& a) {
  const auto set = load_embeddings(a.embeddings);
  VectorIndex index = [&] {
    try {
      return VectorIndex::build(set, parse_metric(a.metric));
    } catch (const DegenerateVector& e) {
      fail(kInterchange, e.what());
    }
  }();
  save_index(index, a.out);
  std::cout << "built " << to_string(index.metric()) << " index over " << index.count() << " x " << index.dim()
            << " -> " << a.out << " (+ " << index_sidecar_path(a.out).filename().string() << ")\n";
  return kOk;
}

struct QueryArgs {
  std::string embeddings;
  std::string index;
  std::string metric = "l2";
  std::string labels;
  std::optional<std::uint32_t> row;
  std::string vector;
  std::size_t k = 10;
  std::string self_match = "include";
  bool json = false;
};

int run_query(const QueryArgs& a) {
  if (a.embeddings.empty() == a.index.empty()) fail(kUsage, "give exactly one of --embeddings or --index");
  if (a.row.has_value() == !a.vector.empty()) fail(kUsage, "give exactly one of --row or --vector");
  if (a.k == 0) fail(kQuery, "k must be positive");

  const VectorIndex index = a.index.empty() ? VectorIndex::build(load_embeddings(a.embeddings), parse_metric(a.metric))
                                            : load_index(a.index);
  std::optional<LabelTable> labels;
  if (!a.labels.empty()) labels = load_aligned_labels(a.labels, index.stored());

  const auto policy = parse_self_match(a.self_match);
  const bool drop_self = a.row && policy == SelfMatchPolicy::exclude;
  const std::size_t want = drop_self ? a.k + 1 : a.k;
  if (a.k > index.count()) {
    std::cerr << "warning: k=" << a.k << " exceeds corpus size " << index.count() << "; returning "
              << index.count() << " neighbors\n";
  }

  RankedResult result;
  try {
    if (a.row) {
      if (*a.row >= index.count()) {
        fail(kQuery, "query row " + std::to_string(*a.row) + " outside corpus of " + std::to_string(index.count()));
      }
      result = index.search_row(*a.row, want);
    } else {
      const auto q = load_any_embeddings(a.vector);
      if (q.count != 1) fail(kQuery, "query vector file must hold exactly one row, found " + std::to_string(q.count));
      result = index.search(q.row(0), want);
    }
  } catch (const DimensionMismatch& e) {
    fail(kQuery, e.what());
  } catch (const DegenerateVector& e) {
    fail(kQuery, e.what());
  }

  if (drop_self) {
    auto& nb = result.neighbors;
    const auto self = std::find_if(nb.begin(), nb.end(), [&](const Neighbor& n) { return n.id == *a.row; });
    if (self != nb.end()) nb.erase(self);
    if (nb.size() > a.k) nb.resize(a.k);
  }

  if (a.json) {
    nlohmann::json doc;
    doc["metric"] = to_string(index.metric());
    doc["k"] = a.k;
    if (a.row) doc["query_row"] = *a.row;
    doc["elapsed_us"] = result.elapsed_us();
    auto& arr = doc["neighbors"] = nlohmann::json::array();
    for (const auto& n : result.neighbors) {
      nlohmann::json e{{"id", n.id}, {"score", n.score}};
      if (labels) {
        e["label"] = labels->label(n.id);
        e["image_id"] = labels->rows[n.id].image_id;
      }
      arr.push_back(std::move(e));
    }
    std::cout << doc.dump(2) << '\n';
  } else {
    char buf[128];
    for (const auto& n : result.neighbors) {
      std::snprintf(buf, sizeof buf, "%u\t%.6f", n.id, n.score);
      std::cout << buf;
      if (labels) std::cout << '\t' << labels->label(n.id);
      std::cout << '\n';
    }
    std::snprintf(buf, sizeof buf, "# search time %.6f s\n", result.elapsed_s());
    std::cerr << buf;
  }
  return kOk;
}

struct EvaluateArgs {
  std::string config;
  std::string embeddings;
  std::string labels;
  std::string metric;
  std::string k_values;
  std::string queries;
  std::string self_match;
  std::string output_dir;
  std::string model_tag;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  bool allow_vacuous = false;
};

RunConfig resolve_config(const EvaluateArgs& a) {
  RunConfig cfg;
  try {
    if (!a.config.empty()) cfg = load_run_config(a.config);
    if (!a.embeddings.empty()) cfg.embeddings_path = a.embeddings;
    if (!a.labels.empty()) cfg.labels_path = a.labels;
    if (!a.metric.empty()) cfg.metric = parse_metric(a.metric);
    if (!a.k_values.empty()) cfg.k_values = parse_k_list(a.k_values);
    if (!a.queries.empty()) cfg.query_rows = parse_query_rows(a.queries);
    if (!a.self_match.empty()) cfg.self_match = parse_self_match(a.self_match);
    if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
    if (!a.model_tag.empty()) cfg.model_tag = a.model_tag;
    if (a.threads) cfg.threads = *a.threads;
    if (a.seed) cfg.seed = *a.seed;
    if (a.allow_vacuous) cfg.allow_vacuous = true;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    fail(kUsage, e.what());
  }
  if (cfg.embeddings_path.empty() || cfg.labels_path.empty()) {
    fail(kUsage, "evaluate needs embeddings and labels (flags or config)");
  }
  return cfg;
}

int run_evaluate(const EvaluateArgs& a) {
  const auto cfg = resolve_config(a);
  auto set = load_embeddings(cfg.embeddings_path);
  if (!cfg.model_tag.empty()) set.source_tag = cfg.model_tag;
  const auto labels = load_aligned_labels(cfg.labels_path, set);

  const auto index = [&] {
    try {
      return VectorIndex::build(set, cfg.metric);
    } catch (const DegenerateVector& e) {
      fail(kInterchange, e.what());
    }
  }();

  std::vector<std::uint32_t> queries;
  try {
    queries = cfg.resolve_queries(index.count());
  } catch (const std::out_of_range& e) {
    fail(kUsage, e.what());
  }

  EvalOptions options;
  options.policy = cfg.self_match;
  options.allow_vacuous = cfg.allow_vacuous;
  options.threads = cfg.threads;

  EvalReport report;
  try {
    report = sweep(index, labels, queries, cfg.k_values, options);
  } catch (const VacuousQuery& e) {
    fail(kEvaluation, std::string(e.what()) + " (pass --allow-vacuous to report it)");
  } catch (const MetricsError& e) {
    fail(kEvaluation, e.what());
  }

  ensure_dir(cfg.output_dir);
  const auto stem = cfg.output_dir / report.model_tag;
  auto json_path = stem;
  json_path += ".report.json";
  auto csv_path = stem;
  csv_path += ".report.csv";
  {
    std::ofstream out(json_path, std::ios::trunc);
    write_report_json(report, out);
  }
  {
    std::ofstream out(csv_path, std::ios::trunc);
    write_report_csv(report, out);
  }

  write_aggregate_table(report, std::cout);
  std::cout << "wrote " << json_path.string() << " and " << csv_path.string() << '\n';
  return kOk;
}

struct ProjectArgs {
  std::string embeddings;
  std::string labels;
  std::string method = "pca";
  std::string output_dir = ".";
  std::string model_tag;
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::size_t pca_dims = 50;
  std::string init = "pca";
  std::uint64_t seed = 0;
};

int run_project(const ProjectArgs& a) {
  auto set = load_any_embeddings(a.embeddings);
  check_embeddings(set);
  if (!a.model_tag.empty()) set.source_tag = a.model_tag;
  std::vector<int> labels;
  if (!a.labels.empty()) labels = label_values(load_aligned_labels(a.labels, set));

  ensure_dir(a.output_dir);
  const auto stem = fs::path(a.output_dir) / (set.source_tag + "." + a.method);

  try {
    const auto data = to_matrix(set);
    Projection2D proj;
    if (a.method == "pca") {
      const auto model = fit_pca(data, std::min<std::size_t>(2, std::min<std::size_t>(set.count - 1, set.dim)));
      proj.coords = transform_pca(model, data);
      if (proj.coords.cols() < 2) {
        proj.coords.conservativeResize(Eigen::NoChange, 2);
        proj.coords.col(1).setZero();
      }
      for (Eigen::Index i = 0; i < model.explained_variance_ratio.size(); ++i) {
        proj.explained_variance_ratio.push_back(model.explained_variance_ratio(i));
      }
      char buf[64];
      std::cout << "explained variance ratio:";
      double cumulative = 0.0;
      for (const double r : proj.explained_variance_ratio) {
        std::snprintf(buf, sizeof buf, " %.6f", r);
        std::cout << buf;
        cumulative += r;
      }
      std::snprintf(buf, sizeof buf, "\ncumulative: %.6f\n", cumulative);
      std::cout << buf;
      emit_scatter(proj, labels, stem, set.source_tag + " PCA");
    } else if (a.method == "tsne") {
      TsneConfig cfg;
      cfg.perplexity = a.perplexity;
      cfg.n_iter = a.iterations;
      cfg.learning_rate = a.learning_rate;
      cfg.early_exaggeration = a.exaggeration;
      cfg.pca_dims = a.pca_dims;
      cfg.init = a.init == "random" ? TsneInit::random : TsneInit::pca;
      cfg.seed = a.seed;
      proj = tsne(data, cfg);
      emit_scatter(proj, labels, stem, set.source_tag + " t-SNE");
      auto trace_path = stem;
      trace_path += ".kl.csv";
      std::ofstream trace(trace_path, std::ios::trunc);
      write_kl_trace_csv(proj, trace);
      std::cout << "final KL divergence: " << proj.kl_trace.back() << " after " << proj.kl_trace.size()
                << " iterations";
      if (proj.floor_hits > 0) std::cout << " (probability floor applied " << proj.floor_hits << " times)";
      std::cout << '\n';
    } else {
      fail(kUsage, "unknown projection method '" + a.method + "'");
    }
  } catch (const ProjectionError& e) {
    fail(kProjection, e.what());
  }
  std::cout << "wrote " << stem.string() << ".svg and " << stem.string() << ".csv\n";
  return kOk;
}

struct ReportArgs {
  std::vector<std::string> reports;
  std::string output_dir = ".";
  std::string name = "comparison";
};

int run_report(const ReportArgs& a) {
  std::vector<EvalReport> reports;
  for (const auto& path : a.reports) {
    std::ifstream in(path);
    if (!in) fail(kInterchange, "cannot open report " + path);
    try {
      reports.push_back(read_report_json(in));
    } catch (const std::exception& e) {
      fail(kInterchange, "malformed report " + path + ": " + e.what());
    }
  }
  ensure_dir(a.output_dir);
  const auto stem = fs::path(a.output_dir) / a.name;
  {
    std::ofstream out(fs::path(stem.string() + ".csv"), std::ios::trunc);
    write_comparison_csv(reports, out);
  }
  {
    std::ofstream out(fs::path(stem.string() + ".svg"), std::ios::trunc);
    write_comparison_svg(reports, out);
  }
  for (const auto& r : reports) {
    write_aggregate_table(r, std::cout);
    std::cout << '\n';
  }
  std::cout << "wrote " << stem.string() << ".csv and " << stem.string() << ".svg\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact flat-index image retrieval: ingest, index, query, evaluate, project, report"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert CSV or EMB1 embeddings (and labels) into canonical EMB1");
  ingest_cmd->add_option("-i,--input", ingest.input, "Embeddings (EMB1 or numeric CSV)")->required();
  ingest_cmd->add_option("-l,--labels", ingest.labels, "Labels CSV (row,image_id,label)");
  ingest_cmd->add_option("-o,--out", ingest.out, "Output EMB1 path")->required();
  ingest_cmd->add_option("--labels-out", ingest.labels_out, "Rewrite validated labels here");

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build", "Build a flat index and save it as EMB1 + JSON sidecar");
  build_cmd->add_option("-e,--embeddings", build.embeddings, "EMB1 embeddings")->required();
  build_cmd->add_option("-m,--metric", build.metric, "l2, cosine or ip")->check(CLI::IsMember({"l2", "cosine", "ip"}));
  build_cmd->add_option("-o,--out", build.out, "Output index path")->required();

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Print the top-k neighbors of a corpus row or external vector");
  query_cmd->add_option("-e,--embeddings", query.embeddings, "EMB1 embeddings (index built on the fly)");
  query_cmd->add_option("--index", query.index, "Saved index from `build`");
  query_cmd->add_option("-m,--metric", query.metric, "l2, cosine or ip")->check(CLI::IsMember({"l2", "cosine", "ip"}));
  query_cmd->add_option("-l,--labels", query.labels, "Labels CSV to annotate neighbors");
  query_cmd->add_option("-r,--row", query.row, "Corpus row to use as query");
  query_cmd->add_option("-v,--vector", query.vector, "One-row EMB1 or CSV query vector");
  query_cmd->add_option("-k", query.k, "Neighbors to return");
  query_cmd->add_option("--self-match", query.self_match, "include or exclude the query row")
      ->check(CLI::IsMember({"include", "exclude"}));
  query_cmd->add_flag("--json", query.json, "Machine-readable output");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Precision/recall/NDCG sweep over k; writes report JSON + CSV");
  eval_cmd->add_option("-c,--config", eval.config, "RunConfig JSON");
  eval_cmd->add_option("-e,--embeddings", eval.embeddings, "EMB1 embeddings");
  eval_cmd->add_option("-l,--labels", eval.labels, "Labels CSV");
  eval_cmd->add_option("-m,--metric", eval.metric, "l2, cosine or ip")->check(CLI::IsMember({"l2", "cosine", "ip"}));
  eval_cmd->add_option("-k,--k-values", eval.k_values, "Comma-separated ascending k list (default 1,5,10,20,50,100)");
  eval_cmd->add_option("-q,--queries", eval.queries, "Query rows: all, 0,1,2 or 0-4");
  eval_cmd->add_option("--self-match", eval.self_match, "include (default) or exclude")
      ->check(CLI::IsMember({"include", "exclude"}));
  eval_cmd->add_option("-o,--output-dir", eval.output_dir, "Report directory");
  eval_cmd->add_option("-t,--model-tag", eval.model_tag, "Report tag (default: embeddings file stem)");
  eval_cmd->add_option("--threads", eval.threads, "Worker threads (0 = all cores)");
  eval_cmd->add_option("--seed", eval.seed, "Recorded seed");
  eval_cmd->add_flag("--allow-vacuous", eval.allow_vacuous, "Report queries with no relevant item instead of failing");

  ProjectArgs project;
  auto* project_cmd = app.add_subcommand("project", "PCA or t-SNE scatter of an embedding set");
  project_cmd->add_option("-e,--embeddings", project.embeddings, "EMB1 or CSV embeddings")->required();
  project_cmd->add_option("-l,--labels", project.labels, "Labels CSV for colouring");
  project_cmd->add_option("--method", project.method, "pca or tsne")->check(CLI::IsMember({"pca", "tsne"}));
  project_cmd->add_option("-o,--output-dir", project.output_dir, "Output directory");
  project_cmd->add_option("-t,--model-tag", project.model_tag, "Output file tag");
  project_cmd->add_option("--perplexity", project.perplexity, "t-SNE perplexity");
  project_cmd->add_option("--iterations", project.iterations, "t-SNE iterations");
  project_cmd->add_option("--learning-rate", project.learning_rate, "t-SNE learning rate");
  project_cmd->add_option("--exaggeration", project.exaggeration, "t-SNE early exaggeration");
  project_cmd->add_option("--pca-dims", project.pca_dims, "PCA pre-reduction width before t-SNE (0 = off)");
  project_cmd->add_option("--init", project.init, "pca or random")->check(CLI::IsMember({"pca", "random"}));
  project_cmd->add_option("--seed", project.seed, "Seed for random initialisation");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Compare evaluation reports across models");
  report_cmd->add_option("reports", report.reports, "Report JSON files")->required();
  report_cmd->add_option("-o,--output-dir", report.output_dir, "Output directory");
  report_cmd->add_option("-n,--name", report.name, "Output file stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest_cmd) return run_ingest(ingest);
    if (*build_cmd) return run_build(build);
    if (*query_cmd) return run_query(query);
    if (*eval_cmd) return run_evaluate(eval);
    if (*project_cmd) return run_project(project);
    if (*report_cmd) return run_report(report);
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const InterchangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInterchange;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kQuery;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
