#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "cbir/projection.hpp"

namespace cbir {

namespace {

// One colour per BIRADS category 1..6; anything else falls back to grey.
constexpr const char* kLabelColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
constexpr const char* kUnlabeledColor = "#808080";

const char* color_for(int label) {
  if (label >= kMinLabel && label <= kMaxLabel) return kLabelColors[label - kMinLabel];
  return kUnlabeledColor;
}

void check_aligned(const Projection2D& proj, std::span<const int> labels) {
  if (!labels.empty() && static_cast<std::size_t>(proj.coords.rows()) != labels.size()) {
    throw ProjectionError("projection has " + std::to_string(proj.coords.rows()) + " points but " +
                          std::to_string(labels.size()) + " labels were given");
  }
  if (proj.coords.rows() > 0 && proj.coords.cols() != 2) {
    throw ProjectionError("projection coordinates must have 2 columns");
  }
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

}  // namespace

void write_scatter_svg(const Projection2D& proj, std::span<const int> labels, std::ostream& out,
                       const std::string& title) {
  check_aligned(proj, labels);

  constexpr double kWidth = 640, kHeight = 520, kMargin = 40, kLegendW = 110;
  const double plot_w = kWidth - 2 * kMargin - kLegendW;
  const double plot_h = kHeight - 2 * kMargin;
  const auto n = proj.coords.rows();

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (n > 0) {
    x_lo = proj.coords.col(0).minCoeff();
    x_hi = proj.coords.col(0).maxCoeff();
    y_lo = proj.coords.col(1).minCoeff();
    y_hi = proj.coords.col(1).maxCoeff();
  }
  if (x_hi <= x_lo) { x_lo -= 0.5; x_hi += 0.5; }
  if (y_hi <= y_lo) { y_lo -= 0.5; y_hi += 0.5; }

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                kWidth, kHeight, kWidth, kHeight);
  out << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">",
                  kMargin + plot_w / 2);
    out << buf << xml_escape(title) << "</text>\n";
  }
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#444\"/>\n",
                kMargin, kMargin, plot_w, plot_h);
  out << buf;

  out << "<g class=\"points\">\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const double px = kMargin + (proj.coords(i, 0) - x_lo) / (x_hi - x_lo) * plot_w;
    const double py = kMargin + (1.0 - (proj.coords(i, 1) - y_lo) / (y_hi - y_lo)) * plot_h;
    const int label = labels.empty() ? 0 : labels[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\" fill-opacity=\"0.8\"/>\n", px,
                  py, color_for(label));
    out << buf;
  }
  out << "</g>\n";

  const std::set<int> present(labels.begin(), labels.end());
  out << "<g class=\"legend\">\n";
  double ly = kMargin + 10;
  for (const int label : present) {
    const double lx = kWidth - kLegendW;
    std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" fill=\"%s\"/>\n", lx, ly,
                  color_for(label));
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\">BIRADS %d</text>\n",
                  lx + 18, ly + 11, label);
    out << buf;
    ly += 20;
  }
  out << "</g>\n</svg>\n";
}

void write_scatter_csv(const Projection2D& proj, std::span<const int> labels, std::ostream& out) {
  check_aligned(proj, labels);
  out << "x,y,label\n";
  char buf[128];
  for (Eigen::Index i = 0; i < proj.coords.rows(); ++i) {
    const int label = labels.empty() ? 0 : labels[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%d\n", proj.coords(i, 0), proj.coords(i, 1), label);
    out << buf;
  }
}

void emit_scatter(const Projection2D& proj, std::span<const int> labels, const std::filesystem::path& stem,
                  const std::string& title) {
  check_aligned(proj, labels);
  auto svg_path = stem;
  svg_path += ".svg";
  auto csv_path = stem;
  csv_path += ".csv";

  std::ofstream svg(svg_path, std::ios::trunc);
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!svg || !csv) {
    throw ProjectionError("cannot open scatter outputs at " + stem.string());
  }
  write_scatter_svg(proj, labels, svg, title);
  write_scatter_csv(proj, labels, csv);
  if (!svg || !csv) {
    throw ProjectionError("failed writing scatter outputs at " + stem.string());
  }
}

void write_kl_trace_csv(const Projection2D& proj, std::ostream& out) {
  out << "iter,kl\n";
  char buf[64];
  for (std::size_t i = 0; i < proj.kl_trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, proj.kl_trace[i]);
    out << buf;
  }
}

}  // namespace cbir
