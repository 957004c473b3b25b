#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cbir/projection.hpp"

namespace cbir {

namespace {

constexpr std::size_t kMaxBisectionSteps = 50;
constexpr double kPerplexityTolerance = 1e-5;

struct EntropyEval {
  double entropy = 0.0;
  double sum = 0.0;
};

// Distances must already be shifted so that their minimum is zero.
EntropyEval conditional_entropy(std::span<const double> shifted, double beta, std::vector<double>& p) {
  double sum = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < shifted.size(); ++j) {
    p[j] = std::exp(-beta * shifted[j]);
    sum += p[j];
    weighted += shifted[j] * p[j];
  }
  return {std::log(sum) + beta * weighted / sum, sum};
}

void check_square(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw ProjectionError(std::string(name) + " must be square, got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  }
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double diff = x(i, c) - x(j, c);
        acc += diff * diff;
      }
      d(i, j) = acc;
      d(j, i) = acc;
    }
  }
  return d;
}

// Student-t kernel 1 / (1 + |yi - yj|^2) with zero diagonal, and its off-diagonal sum.
double student_kernel(const Eigen::MatrixXd& y, Eigen::MatrixXd& num) {
  const auto n = y.rows();
  num.setZero(n, n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num(i, j) = v;
      num(j, i) = v;
      z += 2.0 * v;
    }
  }
  return z;
}

struct Evaluation {
  double kl = 0.0;
  std::size_t floor_hits = 0;
};

// Fills grad with 4 * sum_j (exaggeration * P_ij - Q_ij) * num_ij * (y_i - y_j)
// and returns KL(P || Q) for the un-exaggerated P.
Evaluation evaluate(const Eigen::MatrixXd& p, double exaggeration, const Eigen::MatrixXd& y, Eigen::MatrixXd& num,
                    Eigen::MatrixXd& grad) {
  const auto n = y.rows();
  const double z = student_kernel(y, num);
  grad.setZero(n, 2);

  Evaluation ev;
  for (Eigen::Index i = 0; i < n; ++i) {
    double gx = 0.0;
    double gy = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double q = num(i, j) / z;
      const double pij = p(i, j);
      const double mult = (exaggeration * pij - q) * num(i, j);
      gx += mult * (y(i, 0) - y(j, 0));
      gy += mult * (y(i, 1) - y(j, 1));
      if (pij > 0.0) {
        double qf = q;
        if (qf < kProbabilityFloor) {
          qf = kProbabilityFloor;
          ++ev.floor_hits;
        }
        ev.kl += pij * std::log(pij / qf);
      }
    }
    grad(i, 0) = 4.0 * gx;
    grad(i, 1) = 4.0 * gy;
  }
  return ev;
}

}  // namespace

Calibration perplexity_calibration(std::span<const double> squared_distances, double target_perplexity) {
  if (squared_distances.empty()) {
    throw ProjectionError("perplexity calibration needs at least one neighbor");
  }
  if (!(target_perplexity >= 1.0) || !std::isfinite(target_perplexity)) {
    throw ProjectionError("perplexity must be >= 1, got " + std::to_string(target_perplexity));
  }
  double lo_d = std::numeric_limits<double>::infinity();
  double hi_d = 0.0;
  for (double d : squared_distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw ProjectionError("squared distances must be finite and non-negative");
    }
    lo_d = std::min(lo_d, d);
    hi_d = std::max(hi_d, d);
  }
  if (hi_d == 0.0) {
    throw ProjectionError("all distances are zero; the neighbor bandwidth is undefined");
  }

  // exp(-beta d) normalizes the same under a constant shift.
  std::vector<double> shifted(squared_distances.size());
  double mean_shifted = 0.0;
  for (std::size_t j = 0; j < shifted.size(); ++j) {
    shifted[j] = squared_distances[j] - lo_d;
    mean_shifted += shifted[j];
  }
  mean_shifted /= static_cast<double>(shifted.size());

  const double log_target = std::log(target_perplexity);
  std::vector<double> p(shifted.size());

  Calibration best;
  double best_error = std::numeric_limits<double>::infinity();

  double beta = mean_shifted > 0.0 ? 1.0 / mean_shifted : 1.0;
  double beta_lo = 0.0;
  double beta_hi = std::numeric_limits<double>::infinity();
  for (std::size_t step = 1; step <= kMaxBisectionSteps; ++step) {
    const auto ev = conditional_entropy(shifted, beta, p);
    const double error = std::abs(std::exp(ev.entropy) - target_perplexity);
    if (error < best_error) {
      best_error = error;
      best.beta = beta;
      best.entropy = ev.entropy;
      best.probabilities = p;
      for (auto& v : best.probabilities) v /= ev.sum;
    }
    best.iterations = step;
    if (error <= kPerplexityTolerance * target_perplexity) {
      best.converged = true;
      break;
    }
    if (ev.entropy > log_target) {
      // Too flat: sharpen.
      beta_lo = beta;
      beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
    } else {
      beta_hi = beta;
      beta = 0.5 * (beta + beta_lo);
    }
  }
  return best;
}

Eigen::MatrixXd joint_affinities(const Eigen::MatrixXd& data, double perplexity) {
  const auto n = data.rows();
  if (n < 2) {
    throw ProjectionError("affinities need at least 2 points");
  }
  const Eigen::MatrixXd d2 = squared_distances(data);

  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) row[c++] = d2(i, j);
    }
    Calibration cal;
    try {
      cal = perplexity_calibration(row, perplexity);
    } catch (const ProjectionError& e) {
      throw ProjectionError("point " + std::to_string(i) + ": " + e.what());
    }
    c = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) cond(i, j) = cal.probabilities[c++];
    }
  }

  Eigen::MatrixXd p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  p.diagonal().setZero();
  return p;
}

Eigen::MatrixXd low_dim_affinities(const Eigen::MatrixXd& coords) {
  if (coords.cols() != 2) {
    throw ProjectionError("low-dimensional coordinates must have 2 columns");
  }
  Eigen::MatrixXd num;
  const double z = student_kernel(coords, num);
  return num / z;
}

KlDivergence kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  check_square(p, "P");
  check_square(q, "Q");
  if (p.rows() != q.rows()) {
    throw ProjectionError("P is " + std::to_string(p.rows()) + "x" + std::to_string(p.rows()) + " but Q is " +
                          std::to_string(q.rows()) + "x" + std::to_string(q.rows()));
  }
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) {
    throw ProjectionError("affinity matrices must be non-negative");
  }

  KlDivergence out;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (!(pij > 0.0)) continue;
      double qij = q(i, j);
      if (qij < kProbabilityFloor) {
        qij = kProbabilityFloor;
        ++out.floor_hits;
      }
      out.value += pij * std::log(pij / qij);
    }
  }
  return out;
}

KlGradient kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& coords) {
  check_square(p, "P");
  if (coords.cols() != 2 || coords.rows() != p.rows()) {
    throw ProjectionError("coordinates must be " + std::to_string(p.rows()) + "x2");
  }
  KlGradient out;
  Eigen::MatrixXd num;
  const auto ev = evaluate(p, 1.0, coords, num, out.gradient);
  out.kl = ev.kl;
  out.floor_hits = ev.floor_hits;
  return out;
}

Projection2D tsne(const Eigen::MatrixXd& data, const TsneConfig& config) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (n < 4) {
    throw ProjectionError("t-SNE needs at least 4 points, got " + std::to_string(n));
  }
  if (!(config.perplexity > 1.0)) {
    throw ProjectionError("perplexity must exceed 1");
  }
  if (!(config.perplexity < static_cast<double>(n - 1) / 3.0)) {
    throw ProjectionError("perplexity " + std::to_string(config.perplexity) + " is infeasible for " +
                          std::to_string(n) + " points (must be below (N-1)/3 = " +
                          std::to_string(static_cast<double>(n - 1) / 3.0) + ")");
  }
  if (!data.allFinite()) {
    throw ProjectionError("t-SNE input contains non-finite values");
  }

  Eigen::MatrixXd x = data;
  const auto d = static_cast<std::size_t>(data.cols());
  if (config.pca_dims > 0 && d > config.pca_dims) {
    const auto c = std::min({config.pca_dims, d, n - 1});
    x = transform_pca(fit_pca(data, c), data);
  }

  const Eigen::MatrixXd p = joint_affinities(x, config.perplexity);

  Projection2D out;
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), 2);
  if (config.init == TsneInit::pca && x.cols() >= 2) {
    y = transform_pca(fit_pca(x, 2), x);
    const double sd = std::sqrt((y.col(0).array() - y.col(0).mean()).square().sum() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw ProjectionError("PCA initialization collapsed to a point");
    }
    y *= config.init_std / sd;
  } else {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, config.init_std);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      y(i, 0) = normal(rng);
      y(i, 1) = normal(rng);
    }
  }

  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(y.rows(), 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(y.rows(), 2);
  Eigen::MatrixXd grad;
  Eigen::MatrixXd num;
  out.kl_trace.reserve(config.n_iter);

  for (std::size_t it = 0; it < config.n_iter; ++it) {
    const double exaggeration = it < config.exaggeration_end_iter ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch_iter ? config.momentum_initial : config.momentum_final;

    const auto ev = evaluate(p, exaggeration, y, num, grad);
    out.floor_hits += ev.floor_hits;
    if (!std::isfinite(ev.kl) || !grad.allFinite()) {
      throw ProjectionError("non-finite KL or gradient at iteration " + std::to_string(it));
    }
    out.kl_trace.push_back(ev.kl);

    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
        double g = same_sign ? gains(i, c) * 0.8 : gains(i, c) + 0.2;
        gains(i, c) = std::max(g, config.min_gain);
        update(i, c) = momentum * update(i, c) - config.learning_rate * gains(i, c) * grad(i, c);
        y(i, c) += update(i, c);
      }
    }
    y.rowwise() -= y.colwise().mean();

    if (!y.allFinite()) {
      throw ProjectionError("non-finite coordinates at iteration " + std::to_string(it));
    }
  }

  out.coords = std::move(y);
  return out;
}

}  // namespace cbir
