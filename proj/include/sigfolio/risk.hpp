#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sigfolio/csv.hpp"
#include "sigfolio/errors.hpp"

namespace sigfolio {

/** Which estimator produced a CovEstimate. */
enum class CovMethod { sample, linear_shrinkage };

/**
 * A covariance estimate over a trailing window of daily returns.
 *
 * `delta` records the shrinkage intensity actually applied (0 for the raw
 * sample estimator) and `jitter` the total diagonal loading added to restore
 * positive definiteness; both are kept for audit output.
 */
struct CovEstimate {
  Eigen::MatrixXd matrix;
  int window = 0;
  CovMethod method = CovMethod::sample;
  double delta = 0.0;
  double jitter = 0.0;
};

/**
 * Unbiased sample covariance of the rows of `window` (divisor rows − 1).
 *
 * Throws WindowTooShort for fewer than two rows and ShapeMismatch for an
 * empty asset set.
 */
inline CovEstimate sample_cov(const Eigen::Ref<const Eigen::MatrixXd>& window) {
  const Eigen::Index t = window.rows();
  const Eigen::Index n = window.cols();
  if (n < 1) {
    throw data_error("ShapeMismatch: covariance window has no asset columns");
  }
  if (t < 2) {
    throw data_error("WindowTooShort: covariance needs at least 2 rows, got " +
                     std::to_string(t));
  }
  // Work on a contiguous copy, and keep every reduction in fixed scalar
  // order: the entry for assets (i, j) must depend only on those columns'
  // values, never on strides, alignment phases, or vector-lane grouping.
  // Duplicated assets then produce bitwise-identical rows and columns.
  const Eigen::MatrixXd data = window;
  Eigen::VectorXd mean(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < t; ++r) acc += data(r, j);
    mean(j) = acc / static_cast<double>(t);
  }
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < t; ++r) acc += centered(r, i) * centered(r, j);
      s(i, j) = s(j, i) = acc / static_cast<double>(t - 1);
    }
  }
  CovEstimate est;
  est.matrix = std::move(s);
  est.window = static_cast<int>(t);
  est.method = CovMethod::sample;
  return est;
}

/**
 * The convex combination (1−delta)·S + delta·m·I with m = trace(S)/n.
 * Pure arithmetic — no intensity estimation, no jitter.  Exposed separately
 * so the combination step can be pinned in isolation.
 */
inline Eigen::MatrixXd apply_linear_shrinkage(const Eigen::MatrixXd& s, double delta) {
  const double m = s.trace() / static_cast<double>(s.rows());
  Eigen::MatrixXd out = (1.0 - delta) * s;
  out.diagonal().array() += delta * m;
  return out;
}

/**
 * Linear shrinkage of a sample covariance toward the scaled identity m·I,
 * m = trace(S)/n.  The intensity is the classic optimal linear rate — the
 * estimated estimation error of S divided by the dispersion of S around the
 * target, clipped to [0,1]:
 *
 *     m     = trace(S)/n
 *     d2    = ‖S − m·I‖_F² / n
 *     bbar2 = (1/t²) Σ_k ‖x_k x_kᵀ − S‖_F² / n     (x_k = centered window rows)
 *     delta = min(bbar2, d2) / d2
 *
 * so long, informative windows shrink little and short, noisy ones shrink a
 * lot.  When S already equals the target (d2 = 0) every intensity is a fixed
 * point and delta is reported as 0.
 *
 * If the combined matrix is not safely positive definite, diagonal jitter of
 * 1e-10·m·I is added (repeatedly if ever necessary) until the smallest
 * eigenvalue reaches 1e-10·m; the total added is reported in `jitter`.
 *
 * `forced_delta`, when not NaN, bypasses the estimation entirely — a
 * diagnostic hook for tests and audit tooling.
 *
 * Throws DegenerateWindow when trace(S) = 0 (the window has no variation)
 * and ShapeMismatch when `window` does not match the estimate it produced.
 */
inline CovEstimate shrink_linear(
    const CovEstimate& s, const Eigen::Ref<const Eigen::MatrixXd>& window,
    double forced_delta = std::numeric_limits<double>::quiet_NaN()) {
  const Eigen::Index n = s.matrix.rows();
  const Eigen::Index t = window.rows();
  if (s.matrix.cols() != n || window.cols() != n ||
      static_cast<int>(t) != s.window) {
    throw data_error(
        "ShapeMismatch: shrink_linear window does not match the covariance "
        "estimate");
  }
  const double m = s.matrix.trace() / static_cast<double>(n);
  if (m <= 0.0) {
    throw numeric_error(
        "DegenerateWindow: covariance trace is zero; the return window has no "
        "variation");
  }

  double delta = 0.0;
  if (std::isnan(forced_delta)) {
    Eigen::MatrixXd deviation = s.matrix;
    deviation.diagonal().array() -= m;
    const double d2 = deviation.squaredNorm() / static_cast<double>(n);
    if (d2 > 0.0) {
      // Contiguous copy for the same layout-independence as sample_cov.
      const Eigen::MatrixXd data = window;
      const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
      double sum = 0.0;
      for (Eigen::Index k = 0; k < t; ++k) {
        sum += (centered.row(k).transpose() * centered.row(k) - s.matrix)
                   .squaredNorm();
      }
      const double bbar2 =
          sum / (static_cast<double>(t) * static_cast<double>(t) *
                 static_cast<double>(n));
      delta = std::clamp(std::min(bbar2, d2) / d2, 0.0, 1.0);
    }
  } else {
    if (!(forced_delta >= 0.0 && forced_delta <= 1.0)) {
      throw data_error("DomainError: shrinkage intensity must lie in [0,1], got " +
                       std::to_string(forced_delta));
    }
    delta = forced_delta;
  }

  CovEstimate out;
  out.matrix = apply_linear_shrinkage(s.matrix, delta);
  out.window = s.window;
  out.method = CovMethod::linear_shrinkage;
  out.delta = delta;

  const double floor = 1e-10 * m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.matrix,
                                                     Eigen::EigenvaluesOnly);
  while (eig.eigenvalues().minCoeff() < floor) {
    out.matrix.diagonal().array() += floor;
    out.jitter += floor;
    eig.compute(out.matrix, Eigen::EigenvaluesOnly);
  }
  return out;
}

/** One call covering the daily-loop path: sample covariance, then shrinkage. */
inline CovEstimate estimate_covariance(
    const Eigen::Ref<const Eigen::MatrixXd>& window) {
  return shrink_linear(sample_cov(window), window);
}

/**
 * Audit export: square matrix as CSV with a ticker header row and a leading
 * ticker column.  Throws ShapeMismatch when the label count disagrees.
 */
inline std::string covariance_to_csv(const Eigen::MatrixXd& matrix,
                                     const std::vector<std::string>& tickers) {
  if (matrix.rows() != matrix.cols() ||
      static_cast<Eigen::Index>(tickers.size()) != matrix.rows()) {
    throw data_error("ShapeMismatch: covariance export needs one ticker per row");
  }
  std::string out = "asset";
  for (const auto& name : tickers) {
    out += "," + name;
  }
  out += "\n";
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out += tickers[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      out += "," + format_number(matrix(i, j));
    }
    out += "\n";
  }
  return out;
}

}  // namespace sigfolio
