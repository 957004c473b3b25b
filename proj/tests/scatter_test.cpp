#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbir/projection.hpp"

namespace cbir {
namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

Projection2D three_points() {
  Projection2D proj;
  proj.coords.resize(3, 2);
  proj.coords << 0.0, 0.0, 1.25, -3.5, 1.0 / 3.0, 2.0 / 7.0;
  return proj;
}

TEST(ScatterSvg, OneCirclePerPointAndOneLegendEntryPerLabel) {
  const std::vector<int> labels{1, 2, 3};
  std::ostringstream out;
  write_scatter_svg(three_points(), labels, out, "demo");
  const auto svg = out.str();
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(count_of(svg, "<circle"), 3u);
  EXPECT_EQ(count_of(svg, "BIRADS "), 3u);
  EXPECT_NE(svg.find("demo"), std::string::npos);

  const std::vector<int> repeated{4, 4, 4};
  std::ostringstream one;
  write_scatter_svg(three_points(), repeated, one);
  EXPECT_EQ(count_of(one.str(), "BIRADS "), 1u);
}

TEST(ScatterCsv, RoundTripsWithinOneMillionth) {
  const auto proj = three_points();
  const std::vector<int> labels{6, 1, 3};
  std::ostringstream out;
  write_scatter_csv(proj, labels, out);

  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,label");
  for (Eigen::Index i = 0; i < 3; ++i) {
    ASSERT_TRUE(std::getline(in, line));
    double x = 0, y = 0;
    int label = 0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%d", &x, &y, &label), 3) << line;
    EXPECT_NEAR(x, proj.coords(i, 0), 1e-6);
    EXPECT_NEAR(y, proj.coords(i, 1), 1e-6);
    EXPECT_EQ(label, labels[static_cast<std::size_t>(i)]);
  }
  EXPECT_FALSE(std::getline(in, line));
}

TEST(Scatter, EmptyProjectionIsValid) {
  Projection2D proj;
  proj.coords.resize(0, 2);
  std::ostringstream svg, csv;
  write_scatter_svg(proj, {}, svg);
  write_scatter_csv(proj, {}, csv);
  EXPECT_NE(svg.str().find("</svg>"), std::string::npos);
  EXPECT_EQ(csv.str(), "x,y,label\n");
}

TEST(Scatter, MisalignedLabelsAreRejected) {
  const std::vector<int> labels{1, 2};
  std::ostringstream out;
  EXPECT_THROW(write_scatter_svg(three_points(), labels, out), ProjectionError);
  EXPECT_THROW(write_scatter_csv(three_points(), labels, out), ProjectionError);
}

TEST(Scatter, EmitWritesBothFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "cbir_scatter_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::vector<int> labels{1, 1, 2};
  emit_scatter(three_points(), labels, dir / "m.pca");
  EXPECT_TRUE(std::filesystem::exists(dir / "m.pca.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "m.pca.csv"));
  std::filesystem::remove_all(dir);
}

TEST(KlTrace, OneLinePerIteration) {
  Projection2D proj;
  proj.kl_trace = {2.5, 1.25};
  std::ostringstream out;
  write_kl_trace_csv(proj, out);
  EXPECT_EQ(out.str().substr(0, 7), "iter,kl");
  EXPECT_EQ(count_of(out.str(), "\n"), 3u);
}

}  // namespace
}  // namespace cbir
