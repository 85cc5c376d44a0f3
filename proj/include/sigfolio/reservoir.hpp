#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sigfolio/csv.hpp"
#include "sigfolio/errors.hpp"
#include "sigfolio/market_data.hpp"
#include "sigfolio/rng.hpp"

namespace sigfolio {

/**
 * Randomized-signature reservoir of the controlled system
 *
 *   dR = sum_i act(A_i R + b_i) dX^i,    R(0) = r0,
 *
 * integrated by one forward Euler step per daily increment row of an
 * InputPath.  The projections (A_i, b_i, r0) are drawn once from a seed and
 * frozen; the map from a window of increments to the terminal state R is the
 * feature extractor.
 */
struct ReservoirSpec {
  int r_d = 50;        // reservoir dimension
  double r_m = 0.0;    // mean of the A_i entries
  double r_v = 0.002;  // variance of the A_i entries; the small default keeps
                       // tanh features near their linear regime, which is what
                       // lets the bundled study extract its weak drift signal
  int t_w = 22;        // window length in rows
  enum class Activation { Tanh, Identity, Relu };
  Activation activation = Activation::Tanh;  // Identity is a linear escape hatch
  std::uint64_t seed = 0;
};

/** Frozen random projections; one (A, b) pair per input channel, plus r0. */
struct Projections {
  std::vector<Eigen::MatrixXd> A;  // each r_d x r_d
  std::vector<Eigen::VectorXd> b;  // each r_d
  Eigen::VectorXd r0;              // initial state, length r_d
};

/**
 * Signature features of every complete window: row j is the terminal
 * reservoir state over input rows [j, j + t_w).  Row j is the feature
 * available at decision index t = j + t_w (it uses data strictly before t's
 * target return).
 */
struct FeatureMatrix {
  Eigen::MatrixXd rows;
  int t_w = 22;
};

/**
 * Draws the frozen projections for `n_channels` input channels.
 * Draw order from the projections stream of spec.seed:
 *   A_0 row-major, b_0, A_1, b_1, ..., A_d, b_d, r0,
 * with A entries N(r_m, r_v), b entries N(0, 1), r0 entries N(0, 1).
 */
inline Projections init_projections(const ReservoirSpec& spec, int n_channels) {
  if (spec.r_d < 1) throw data_error("ShapeMismatch: r_d must be >= 1");
  if (!(spec.r_v >= 0.0)) throw data_error("ShapeMismatch: r_v must be >= 0");
  if (n_channels < 1) throw data_error("ShapeMismatch: need at least one input channel");

  RandomStream stream(spec.seed, kStreamProjections);
  const double sd = std::sqrt(spec.r_v);
  Projections proj;
  proj.A.reserve(static_cast<std::size_t>(n_channels));
  proj.b.reserve(static_cast<std::size_t>(n_channels));
  for (int i = 0; i < n_channels; ++i) {
    Eigen::MatrixXd a(spec.r_d, spec.r_d);
    stream.fill_gaussian(a, spec.r_m, sd);
    proj.A.push_back(std::move(a));
    Eigen::VectorXd b(spec.r_d);
    stream.fill_gaussian(b, 0.0, 1.0);
    proj.b.push_back(std::move(b));
  }
  proj.r0.resize(spec.r_d);
  stream.fill_gaussian(proj.r0, 0.0, 1.0);
  return proj;
}

namespace detail {

inline void check_projection_shapes(const Projections& proj, Eigen::Index n_channels,
                                    int r_d) {
  if (static_cast<Eigen::Index>(proj.A.size()) != n_channels ||
      static_cast<Eigen::Index>(proj.b.size()) != n_channels)
    throw data_error("DimensionMismatch: projections cover " + std::to_string(proj.A.size()) +
                     " channels, path has " + std::to_string(n_channels));
  if (proj.r0.size() != r_d)
    throw data_error("DimensionMismatch: r0 length " + std::to_string(proj.r0.size()) +
                     " does not match r_d " + std::to_string(r_d));
  for (const auto& a : proj.A)
    if (a.rows() != r_d || a.cols() != r_d)
      throw data_error("DimensionMismatch: projection matrix is not r_d x r_d");
  for (const auto& b : proj.b)
    if (b.size() != r_d) throw data_error("DimensionMismatch: projection bias is not length r_d");
}

/**
 * Copies the window rows [start, start + t_w) and, when the path requests it,
 * divides each asset-return column by its first value in the window.  The
 * division is skipped for a column whose first value has magnitude < 1e-6,
 * which keeps near-zero leading returns from blowing the scale up.
 */
inline Eigen::MatrixXd window_increments(const InputPath& path, Eigen::Index start, int t_w) {
  Eigen::MatrixXd win = path.channels.middleRows(start, t_w);
  if (path.renormalize_windows) {
    for (int j = 0; j < path.n_assets; ++j) {
      const Eigen::Index c = path.asset_offset + j;
      const double first = win(0, c);
      if (std::abs(first) >= 1e-6) win.col(c) /= first;
    }
  }
  return win;
}

}  // namespace detail

/**
 * Terminal reservoir state over the window starting at `start_row`:
 *
 *   R <- R + sum_i act(A_i R + b_i) * dX_k^i   for each window row k,
 *
 * with all channel fields evaluated at the state from before the step.
 * Restarts from r0 for every window.
 */
inline Eigen::VectorXd compute_signature(const InputPath& path, Eigen::Index start_row,
                                         const Projections& proj, const ReservoirSpec& spec) {
  if (spec.t_w < 1) throw data_error("ShapeMismatch: t_w must be >= 1");
  if (start_row < 0 || start_row + spec.t_w > path.channels.rows())
    throw data_error("PathTooShort: window [" + std::to_string(start_row) + ", " +
                     std::to_string(start_row + spec.t_w) + ") exceeds " +
                     std::to_string(path.channels.rows()) + " rows");
  const Eigen::Index d1 = path.channels.cols();
  detail::check_projection_shapes(proj, d1, spec.r_d);

  const Eigen::MatrixXd win = detail::window_increments(path, start_row, spec.t_w);

  Eigen::VectorXd r = proj.r0;
  Eigen::VectorXd next(spec.r_d);
  Eigen::VectorXd field(spec.r_d);
  for (int k = 0; k < spec.t_w; ++k) {
    next = r;
    for (Eigen::Index i = 0; i < d1; ++i) {
      field.noalias() = proj.A[static_cast<std::size_t>(i)] * r;
      field += proj.b[static_cast<std::size_t>(i)];
      switch (spec.activation) {
        case ReservoirSpec::Activation::Tanh:
          field = field.array().tanh().matrix();
          break;
        case ReservoirSpec::Activation::Relu:
          field = field.cwiseMax(0.0);
          break;
        case ReservoirSpec::Activation::Identity:
          break;
      }
      next += field * win(k, i);
    }
    r.swap(next);
  }
  return r;
}

/** Features of every complete window; row j covers path rows [j, j + t_w). */
inline FeatureMatrix rolling_features(const InputPath& path, const Projections& proj,
                                      const ReservoirSpec& spec) {
  if (path.channels.rows() < spec.t_w)
    throw data_error("PathTooShort: " + std::to_string(path.channels.rows()) +
                     " rows for window " + std::to_string(spec.t_w));
  const Eigen::Index n_windows = path.channels.rows() - spec.t_w + 1;
  FeatureMatrix out;
  out.t_w = spec.t_w;
  out.rows.resize(n_windows, spec.r_d);
  for (Eigen::Index j = 0; j < n_windows; ++j)
    out.rows.row(j) = compute_signature(path, j, proj, spec).transpose();
  return out;
}

/** Tidy CSV export (window_start, feature_1..feature_r_d). */
inline std::string features_to_csv(const FeatureMatrix& f) {
  std::string out = "window_start";
  for (Eigen::Index j = 0; j < f.rows.cols(); ++j) out += ",f" + std::to_string(j + 1);
  out += "\n";
  for (Eigen::Index i = 0; i < f.rows.rows(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index j = 0; j < f.rows.cols(); ++j) out += "," + format_number(f.rows(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace sigfolio
