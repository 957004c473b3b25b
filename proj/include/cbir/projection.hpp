#ifndef CBIR_PROJECTION_HPP
#define CBIR_PROJECTION_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbir/interchange.hpp"

namespace cbir {

class ProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Embeddings widened to double, one row per sample.
Eigen::MatrixXd to_matrix(const EmbeddingSet& set);

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Eigen::RowVectorXd mean;
  /// c x d, rows are orthonormal principal axes.
  Eigen::MatrixXd components;
  /// Sample variance (N - 1 denominator) along each axis, descending.
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd explained_variance_ratio;
  /// Sum of per-feature sample variances of the training data.
  double total_variance = 0.0;
};

/**
 * Fits `components` principal axes through an SVD of the centered data.
 *
 * Each axis is signed so that its largest-magnitude entry is positive.
 * Requires N >= 2 and components <= min(N - 1, d); throws ProjectionError when
 * every row is identical.
 */
PcaModel fit_pca(const Eigen::MatrixXd& data, std::size_t components);

/// (data - mean) * components^T.
Eigen::MatrixXd transform_pca(const PcaModel& model, const Eigen::MatrixXd& data);

// ---------------------------------------------------------------------------
// t-SNE

enum class TsneInit { pca, random };

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t n_iter = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_end_iter = 250;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  std::size_t momentum_switch_iter = 250;
  /// Input is PCA-reduced to min(pca_dims, d, N - 1) before affinities; 0 disables.
  std::size_t pca_dims = 50;
  TsneInit init = TsneInit::pca;
  double init_std = 1e-4;
  double min_gain = 0.01;
  std::uint64_t seed = 0;
};

struct Projection2D {
  /// N x 2.
  Eigen::MatrixXd coords;
  std::optional<std::vector<int>> labels;
  /// KL(P || Q) against the un-exaggerated P, one value per iteration.
  std::vector<double> kl_trace;
  /// Times the 1e-12 floor was applied inside Q / KL evaluation.
  std::size_t floor_hits = 0;
  /// Explained-variance ratios when produced by PCA.
  std::vector<double> explained_variance_ratio;
};

/// Floor used in place of zero inside log and division terms.
inline constexpr double kProbabilityFloor = 1e-12;

struct Calibration {
  double beta = 1.0;
  /// Conditional distribution p_{j|i} over the given neighbors.
  std::vector<double> probabilities;
  /// Entropy in nats.
  double entropy = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/**
 * Bisection on the Gaussian precision beta so that exp(H) of
 * p_j ∝ exp(-beta * d_j) matches the target perplexity within 1e-5 relative,
 * or the best of 50 steps.
 */
Calibration perplexity_calibration(std::span<const double> squared_distances, double target_perplexity);

/// Symmetric joint affinities (p_{j|i} + p_{i|j}) / 2N with zero diagonal.
Eigen::MatrixXd joint_affinities(const Eigen::MatrixXd& data, double perplexity);

/// Student-t joint affinities of 2-D points, zero diagonal, summing to 1.
Eigen::MatrixXd low_dim_affinities(const Eigen::MatrixXd& coords);

struct KlDivergence {
  double value = 0.0;
  std::size_t floor_hits = 0;
};

/// sum over P_ij > 0 of P_ij log(P_ij / Q_ij), with Q floored at 1e-12.
KlDivergence kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

struct KlGradient {
  double kl = 0.0;
  /// N x 2, d KL / d coords.
  Eigen::MatrixXd gradient;
  std::size_t floor_hits = 0;
};

/// KL(P || Q(coords)) and its analytic gradient; P may be exaggerated.
KlGradient kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& coords);

Projection2D tsne(const Eigen::MatrixXd& data, const TsneConfig& config);

// ---------------------------------------------------------------------------
// Output

/// Self-contained SVG scatter, one colour per BIRADS label plus legend.
void write_scatter_svg(const Projection2D& proj, std::span<const int> labels, std::ostream& out,
                       const std::string& title = {});

/// `x,y,label` with six digits after the decimal point.
void write_scatter_csv(const Projection2D& proj, std::span<const int> labels, std::ostream& out);

/// Writes `<stem>.svg` and `<stem>.csv`.
void emit_scatter(const Projection2D& proj, std::span<const int> labels, const std::filesystem::path& stem,
                  const std::string& title = {});

/// `iter,kl`.
void write_kl_trace_csv(const Projection2D& proj, std::ostream& out);

}  // namespace cbir

#endif
