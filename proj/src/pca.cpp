#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "cbir/projection.hpp"

namespace cbir {

Eigen::MatrixXd to_matrix(const EmbeddingSet& set) {
  Eigen::MatrixXd m(set.count, set.dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto row = set.row(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = static_cast<double>(row[static_cast<std::size_t>(j)]);
    }
  }
  return m;
}

PcaModel fit_pca(const Eigen::MatrixXd& data, std::size_t components) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (n < 2) {
    throw ProjectionError("PCA needs at least 2 samples, got " + std::to_string(n));
  }
  if (d == 0) {
    throw ProjectionError("PCA needs at least one feature");
  }
  const auto max_components = std::min(n - 1, d);
  if (components == 0 || components > max_components) {
    throw ProjectionError("cannot fit " + std::to_string(components) + " components to " + std::to_string(n) +
                          "x" + std::to_string(d) + " data (allowed 1.." + std::to_string(max_components) + ")");
  }
  if (!data.allFinite()) {
    throw ProjectionError("PCA input contains non-finite values");
  }

  PcaModel model;
  model.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean;

  const double scale = std::max(1.0, data.cwiseAbs().maxCoeff());
  if (centered.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    throw ProjectionError("PCA input has zero total variance (all rows identical)");
  }

  const double dof = static_cast<double>(n - 1);
  model.total_variance = centered.squaredNorm() / dof;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const auto& v = svd.matrixV();

  const auto c = static_cast<Eigen::Index>(components);
  model.components.resize(c, static_cast<Eigen::Index>(d));
  model.explained_variance.resize(c);
  model.explained_variance_ratio.resize(c);
  for (Eigen::Index i = 0; i < c; ++i) {
    Eigen::RowVectorXd axis = v.col(i).transpose();
    Eigen::Index pivot = 0;
    axis.cwiseAbs().maxCoeff(&pivot);
    if (axis(pivot) < 0.0) axis = -axis;
    model.components.row(i) = axis;

    const double var = sv(i) * sv(i) / dof;
    model.explained_variance(i) = var;
    model.explained_variance_ratio(i) = var / model.total_variance;
  }
  return model;
}

Eigen::MatrixXd transform_pca(const PcaModel& model, const Eigen::MatrixXd& data) {
  if (data.cols() != model.mean.cols()) {
    throw ProjectionError("dimension mismatch: model expects " + std::to_string(model.mean.cols()) +
                          " features, got " + std::to_string(data.cols()));
  }
  return (data.rowwise() - model.mean) * model.components.transpose();
}

}  // namespace cbir
