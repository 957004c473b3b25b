#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "cbir/metrics.hpp"

namespace cbir {

namespace {

using nlohmann::json;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void summary_fields(const std::string& name, const MetricSummary& s, json& into) {
  into["mean_" + name] = s.mean;
  into["min_" + name] = s.min;
  into["max_" + name] = s.max;
}

MetricSummary read_summary(const json& j, const std::string& name) {
  return {j.at("mean_" + name).get<double>(), j.at("min_" + name).get<double>(),
          j.at("max_" + name).get<double>()};
}

}  // namespace

void write_report_json(const EvalReport& report, std::ostream& out) {
  json doc;
  doc["model_tag"] = report.model_tag;
  doc["metric"] = report.metric;
  doc["policy"] = to_string(report.policy);
  doc["k_values"] = report.k_values;

  auto& rows = doc["rows"] = json::array();
  for (const auto& m : report.per_query) {
    rows.push_back({{"query", m.query_row},
                    {"k", m.k},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"ndcg", m.ndcg},
                    {"elapsed_us", m.elapsed_us()},
                    {"vacuous", m.vacuous}});
  }

  auto& aggs = doc["aggregates"] = json::array();
  for (const auto& a : report.aggregates) {
    json entry{{"k", a.k}, {"queries", a.queries}};
    summary_fields("precision", a.precision, entry);
    summary_fields("recall", a.recall, entry);
    summary_fields("ndcg", a.ndcg, entry);
    summary_fields("elapsed_us", a.elapsed_us, entry);
    aggs.push_back(std::move(entry));
  }
  out << doc.dump(2) << '\n';
}

EvalReport read_report_json(std::istream& in) {
  const auto doc = json::parse(in);
  EvalReport report;
  report.model_tag = doc.at("model_tag").get<std::string>();
  report.metric = doc.value("metric", std::string{});
  report.policy = parse_self_match(doc.at("policy").get<std::string>());
  report.k_values = doc.at("k_values").get<std::vector<std::size_t>>();
  for (const auto& row : doc.at("rows")) {
    QueryMetrics m;
    m.query_row = row.at("query").get<std::uint32_t>();
    m.k = row.at("k").get<std::size_t>();
    m.precision = row.at("precision").get<double>();
    m.recall = row.at("recall").get<double>();
    m.ndcg = row.at("ndcg").get<double>();
    m.elapsed = std::chrono::nanoseconds(std::llround(row.at("elapsed_us").get<double>() * 1000.0));
    m.vacuous = row.at("vacuous").get<bool>();
    report.per_query.push_back(m);
  }
  for (const auto& entry : doc.at("aggregates")) {
    KAggregate a;
    a.k = entry.at("k").get<std::size_t>();
    a.queries = entry.at("queries").get<std::size_t>();
    a.precision = read_summary(entry, "precision");
    a.recall = read_summary(entry, "recall");
    a.ndcg = read_summary(entry, "ndcg");
    a.elapsed_us = read_summary(entry, "elapsed_us");
    report.aggregates.push_back(a);
  }
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "query,k,precision,recall,ndcg,search_time_s\n";
  for (const auto& m : report.per_query) {
    out << m.query_row << ',' << m.k << ',' << fixed6(m.precision) << ',' << fixed6(m.recall) << ','
        << fixed6(m.ndcg) << ',' << fixed6(m.elapsed_s()) << '\n';
  }
}

void write_aggregate_table(const EvalReport& report, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %8s %10s %10s %10s %14s\n", "k", "queries", "precision", "recall",
                "ndcg", "search_time_s");
  out << "model " << report.model_tag << " (" << report.metric << ", self-match "
      << to_string(report.policy) << ")\n"
      << line;
  for (const auto& a : report.aggregates) {
    std::snprintf(line, sizeof line, "%-6zu %8zu %10.6f %10.6f %10.6f %14.6f\n", a.k, a.queries, a.precision.mean,
                  a.recall.mean, a.ndcg.mean, a.elapsed_us.mean * 1e-6);
    out << line;
  }
  if (const auto vac = report.vacuous_count(); vac > 0) {
    out << vac << " vacuous row(s) (no relevant item in corpus)\n";
  }
}

void write_comparison_csv(std::span<const EvalReport> reports, std::ostream& out) {
  out << "model,k,mean_precision,mean_recall,mean_ndcg,mean_search_time_s\n";
  for (const auto& r : reports) {
    for (const auto& a : r.aggregates) {
      out << r.model_tag << ',' << a.k << ',' << fixed6(a.precision.mean) << ',' << fixed6(a.recall.mean) << ','
          << fixed6(a.ndcg.mean) << ',' << fixed6(a.elapsed_us.mean * 1e-6) << '\n';
    }
  }
}

void write_comparison_svg(std::span<const EvalReport> reports, std::ostream& out) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  struct Panel {
    const char* title;
    double (*value)(const KAggregate&);
  };
  static constexpr Panel kPanels[] = {
      {"Precision@k", [](const KAggregate& a) { return a.precision.mean; }},
      {"Recall@k", [](const KAggregate& a) { return a.recall.mean; }},
      {"NDCG@k", [](const KAggregate& a) { return a.ndcg.mean; }},
      {"Search time (s)", [](const KAggregate& a) { return a.elapsed_us.mean * 1e-6; }},
  };

  std::set<std::size_t> k_union;
  for (const auto& r : reports) {
    for (const auto& a : r.aggregates) k_union.insert(a.k);
  }
  const std::vector<std::size_t> ks(k_union.begin(), k_union.end());

  constexpr double kPanelW = 420, kPanelH = 300, kMargin = 50, kLegendH = 30;
  const double width = 2 * kPanelW;
  const double height = 2 * kPanelH + kLegendH + 10;
  char buf[256];

  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  out << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < 4; ++p) {
    const double ox = static_cast<double>(p % 2) * kPanelW;
    const double oy = static_cast<double>(p / 2) * kPanelH;
    const double plot_w = kPanelW - 2 * kMargin;
    const double plot_h = kPanelH - 2 * kMargin;

    double lo = 0.0;
    double hi = 0.0;
    for (const auto& r : reports) {
      for (const auto& a : r.aggregates) hi = std::max(hi, kPanels[p].value(a));
    }
    if (p < 3) hi = std::max(hi, 1.0);
    if (hi <= lo) hi = lo + 1.0;

    const auto x_of = [&](std::size_t k) {
      const auto pos = static_cast<double>(std::find(ks.begin(), ks.end(), k) - ks.begin());
      const double span = ks.size() > 1 ? static_cast<double>(ks.size() - 1) : 1.0;
      return ox + kMargin + (ks.size() > 1 ? pos / span : 0.5) * plot_w;
    };
    const auto y_of = [&](double v) { return oy + kMargin + (1.0 - (v - lo) / (hi - lo)) * plot_h; };

    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">%s</text>\n",
                  ox + kPanelW / 2, oy + 25, kPanels[p].title);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#444\"/>\n",
                  ox + kMargin, oy + kMargin, plot_w, plot_h);
    out << buf;
    for (const auto k : ks) {
      std::snprintf(buf, sizeof buf,
                    "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">%zu</text>\n",
                    x_of(k), oy + kMargin + plot_h + 14, k);
      out << buf;
    }
    for (const double v : {lo, hi}) {
      std::snprintf(buf, sizeof buf,
                    "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">%.4g</text>\n",
                    ox + kMargin - 4, y_of(v) + 3, v);
      out << buf;
    }

    for (std::size_t m = 0; m < reports.size(); ++m) {
      const char* color = kPalette[m % std::size(kPalette)];
      std::string points;
      for (const auto& a : reports[m].aggregates) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x_of(a.k), y_of(kPanels[p].value(a)));
        points += buf;
      }
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << points
          << "\"/>\n";
    }
  }

  for (std::size_t m = 0; m < reports.size(); ++m) {
    const double x = 20 + static_cast<double>(m) * 180;
    const double y = 2 * kPanelH + 15;
    std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" fill=\"%s\"/>\n", x, y,
                  kPalette[m % std::size(kPalette)]);
    out << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\">", x + 18,
                  y + 11);
    out << buf << xml_escape(reports[m].model_tag) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace cbir
