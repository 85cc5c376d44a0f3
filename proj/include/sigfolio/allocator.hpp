#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sigfolio/errors.hpp"
#include "sigfolio/risk.hpp"
#include "sigfolio/rng.hpp"

namespace sigfolio {

/**
 * A fully-invested long-only allocation: weights sum to 1 (within 1e-8) and
 * respect the per-asset box [0, upper] (within 1e-10).
 *
 * `objective` is the value of the criterion the vector optimizes, in input
 * units: the Sharpe ratio for max_sharpe (also on the min-variance fallback,
 * where it reports the Sharpe attained), the portfolio variance for
 * min_variance_weights.  `min_variance_fallback` is set when a bearish
 * forecast forced the fallback; the backtest ledger surfaces it.
 */
struct WeightVector {
  Eigen::VectorXd weights;
  int as_of = -1;
  bool min_variance_fallback = false;
  double objective = 0.0;
};

/**
 * Euclidean projection onto {w : Σ w_i = total, 0 ≤ w_i ≤ upper}.
 *
 * The projection is clamp(v − τ, 0, upper) for the unique τ making the sum
 * correct; g(τ) = Σ clamp(v_i − τ, 0, upper) is piecewise linear and
 * non-increasing, so τ is found exactly by sorting the 2n breakpoints and
 * interpolating on the crossing segment — no iterative tolerance involved.
 *
 * Throws Infeasible when n·upper < total.
 */
inline Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double upper,
                                              double total = 1.0) {
  const Eigen::Index n = v.size();
  if (n < 1) {
    throw data_error("ShapeMismatch: cannot project an empty vector");
  }
  if (!(upper > 0.0) || !(total > 0.0)) {
    throw data_error("DomainError: projection needs upper > 0 and total > 0");
  }
  if (static_cast<double>(n) * upper < total) {
    throw numeric_error("Infeasible: " + std::to_string(n) + " assets capped at " +
                        std::to_string(upper) + " cannot sum to " +
                        std::to_string(total));
  }

  const auto mass = [&](double tau) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      s += std::clamp(v(i) - tau, 0.0, upper);
    }
    return s;
  };

  std::vector<double> bps(static_cast<std::size_t>(2 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    bps[static_cast<std::size_t>(2 * i)] = v(i) - upper;
    bps[static_cast<std::size_t>(2 * i) + 1] = v(i);
  }
  std::sort(bps.begin(), bps.end());

  // First breakpoint where the mass has dropped to `total` or below.
  const auto it = std::partition_point(bps.begin(), bps.end(),
                                       [&](double b) { return mass(b) > total; });
  double tau;
  if (it == bps.begin()) {
    tau = bps.front();  // everything at the cap; only possible when n·upper == total
  } else if (it == bps.end()) {
    tau = bps.back();  // mass(last) is 0 ≤ total, so partition_point stops earlier
  } else {
    const double hi = *it;
    const double lo = *(it - 1);
    const double mlo = mass(lo);
    const double mhi = mass(hi);
    tau = (mlo > mhi) ? lo + (mlo - total) * (hi - lo) / (mlo - mhi) : hi;
  }

  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = std::clamp(v(i) - tau, 0.0, upper);
  }
  return w;
}

/**
 * The 1/n benchmark allocation.  Throws CapViolation when 1/n exceeds the
 * per-asset cap (e.g. fewer than 5 assets under a 0.2 cap).
 */
inline WeightVector equal_weights(int n, double upper = 0.2) {
  if (n < 1) {
    throw data_error("ShapeMismatch: equal_weights needs at least one asset");
  }
  const double share = 1.0 / static_cast<double>(n);
  if (share > upper) {
    throw data_error("CapViolation: 1/" + std::to_string(n) +
                     " exceeds the per-asset cap " + std::to_string(upper));
  }
  WeightVector out;
  out.weights = Eigen::VectorXd::Constant(n, share);
  return out;
}

/** Sharpe ratio of a fully-invested allocation.  Throws ZeroVol on zero variance. */
inline double sharpe_ratio(const Eigen::VectorXd& w, const Eigen::VectorXd& mu,
                           const Eigen::MatrixXd& sigma, double rf = 0.0) {
  const double var = w.dot(sigma * w);
  if (!(var > 0.0)) {
    throw numeric_error("ZeroVol: portfolio variance is not positive");
  }
  return (mu.dot(w) - rf) / std::sqrt(var);
}

namespace detail {

/** Vertex maximizing cᵀw over {Σw = 1, 0 ≤ w ≤ upper}: cap the largest coefficients. */
inline Eigen::VectorXd linear_vertex(const Eigen::VectorXd& c, double upper) {
  const Eigen::Index n = c.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return c(a) > c(b); });
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  double remaining = 1.0;
  for (const Eigen::Index i : order) {
    const double take = std::min(upper, remaining);
    w(i) = take;
    remaining -= take;
    if (remaining <= 0.0) break;
  }
  return w;
}

/** ‖P(w + g) − w‖ with a unit probe step: zero exactly at constrained stationary points. */
inline double stationarity_gap(const Eigen::VectorXd& w, const Eigen::VectorXd& g,
                               double upper) {
  return (project_capped_simplex(w + g, upper) - w).norm();
}

/**
 * Projected-gradient ascent with Armijo backtracking.  Runs until the unit
 * probe gap falls below `tol`, progress stalls, or `iters` steps pass.
 */
template <typename ValueFn, typename GradFn>
Eigen::VectorXd pg_ascent(Eigen::VectorXd w, ValueFn&& value, GradFn&& grad,
                          double upper, int iters, double tol) {
  double eta = 0.1;
  double fw = value(w);
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd g = grad(w);
    if (stationarity_gap(w, g, upper) <= tol) break;
    bool accepted = false;
    while (eta > 1e-16) {
      const Eigen::VectorXd z = project_capped_simplex(w + eta * g, upper);
      const double gain = g.dot(z - w);
      if (gain <= 0.0) break;  // numerically stationary at every remaining step size
      const double fz = value(z);
      if (fz >= fw + 1e-4 * gain) {
        w = z;
        fw = fz;
        eta = std::min(eta * 1.25, 1e3);
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
  }
  return w;
}

struct ActiveSet {
  std::vector<int> lower;
  std::vector<int> upper;
  std::vector<char> state;  // 'L', 'U' or 'F' per coordinate
};

inline ActiveSet classify_active(const Eigen::VectorXd& w, double upper,
                                 double tol = 1e-7) {
  ActiveSet a;
  a.state.assign(static_cast<std::size_t>(w.size()), 'F');
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) <= tol) {
      a.lower.push_back(static_cast<int>(i));
      a.state[static_cast<std::size_t>(i)] = 'L';
    } else if (w(i) >= upper - tol) {
      a.upper.push_back(static_cast<int>(i));
      a.state[static_cast<std::size_t>(i)] = 'U';
    }
  }
  return a;
}

/**
 * Solves the KKT system of min xᵀQx subject to Ax = b by full-pivot LU.
 * Returns an empty vector when the system is singular or the solution is
 * not finite.
 */
inline Eigen::VectorXd kkt_solve(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& A,
                                 const Eigen::VectorXd& b) {
  const Eigen::Index n = Q.rows();
  const Eigen::Index m = A.rows();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = 2.0 * Q;
  M.topRightCorner(n, m) = A.transpose();
  M.bottomLeftCorner(m, n) = A;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
  rhs.tail(m) = b;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) return {};
  Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return {};
  return sol.head(n);
}

/**
 * Snaps a candidate to the active set exactly: bound coordinates to their
 * bounds, free coordinates rescaled so the total is exactly the leftover
 * mass.  Returns false when the candidate is incompatible with the set.
 */
inline bool exactify(Eigen::VectorXd& w, const ActiveSet& a, double upper) {
  const Eigen::Index n = w.size();
  for (const int i : a.lower) w(i) = 0.0;
  for (const int i : a.upper) w(i) = upper;
  const double target = 1.0 - upper * static_cast<double>(a.upper.size());
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a.state[static_cast<std::size_t>(i)] == 'F') {
      free_sum += w(i);
      ++free_count;
    }
  }
  if (free_count == 0) {
    return std::abs(target) <= 1e-9;
  }
  if (target <= 0.0 || free_sum <= 1e-14) return false;
  const double scale = target / free_sum;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a.state[static_cast<std::size_t>(i)] != 'F') continue;
    w(i) *= scale;
    if (w(i) < -1e-12 || w(i) > upper + 1e-12) return false;
    w(i) = std::clamp(w(i), 0.0, upper);
  }
  return true;
}

/**
 * Exact solve of the maximum-Sharpe program restricted to a guessed active
 * set, through the convex reformulation: minimize yᵀΣy subject to μᵀy = 1,
 * y_i = 0 on the lower set and y_i = upper·(Σy) on the upper set, then map
 * back via w = y / Σy.  Empty result when the guess is inconsistent.
 */
inline Eigen::VectorXd polish_sharpe(const Eigen::VectorXd& mu,
                                     const Eigen::MatrixXd& sigma, double upper,
                                     const Eigen::VectorXd& w) {
  const Eigen::Index n = w.size();
  const ActiveSet a = classify_active(w, upper);
  const Eigen::Index m =
      1 + static_cast<Eigen::Index>(a.lower.size() + a.upper.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  A.row(0) = mu.transpose();
  b(0) = 1.0;
  Eigen::Index r = 1;
  for (const int i : a.lower) A(r++, i) = 1.0;
  for (const int i : a.upper) {
    A.row(r).setConstant(-upper);
    A(r, i) += 1.0;
    ++r;
  }
  const Eigen::VectorXd y = kkt_solve(sigma, A, b);
  if (y.size() == 0) return {};
  const double kappa = y.sum();
  if (!(kappa > 1e-12)) return {};
  Eigen::VectorXd wp = y / kappa;
  if (!exactify(wp, a, upper)) return {};
  return wp;
}

/** Same idea for the minimum-variance program, which lives in w-space directly. */
inline Eigen::VectorXd polish_minvar(const Eigen::MatrixXd& sigma, double upper,
                                     const Eigen::VectorXd& w) {
  const Eigen::Index n = w.size();
  const ActiveSet a = classify_active(w, upper);
  const Eigen::Index m =
      1 + static_cast<Eigen::Index>(a.lower.size() + a.upper.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  A.row(0).setOnes();
  b(0) = 1.0;
  Eigen::Index r = 1;
  for (const int i : a.lower) A(r++, i) = 1.0;
  for (const int i : a.upper) {
    A(r, i) = 1.0;
    b(r) = upper;
    ++r;
  }
  Eigen::VectorXd wp = kkt_solve(sigma, A, b);
  if (wp.size() == 0) return {};
  if (!exactify(wp, a, upper)) return {};
  return wp;
}

/** Alternates gradient ascent and active-set polish until certified. */
template <typename ValueFn, typename GradFn, typename PolishFn>
Eigen::VectorXd solve_from_start(Eigen::VectorXd w0, ValueFn&& value, GradFn&& grad,
                                 PolishFn&& polish, double upper, double tol,
                                 int rounds, int iters_per_round) {
  Eigen::VectorXd w = project_capped_simplex(std::move(w0), upper);
  for (int round = 0; round < rounds; ++round) {
    w = pg_ascent(std::move(w), value, grad, upper, iters_per_round, tol);
    Eigen::VectorXd wp = polish(w);
    if (wp.size() != 0 && value(wp) >= value(w) - 1e-12 &&
        stationarity_gap(wp, grad(wp), upper) <= tol) {
      w = std::move(wp);
    }
    if (stationarity_gap(w, grad(w), upper) <= tol) break;
  }
  return w;
}

inline bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return a(i) < b(i);
  }
  return false;
}

/** Deterministic reduction: best objective, then smaller norm, then lexicographic. */
inline void reduce_candidate(Eigen::VectorXd& best, double& best_value,
                             const Eigen::VectorXd& w, double value) {
  if (best.size() == 0 || value > best_value + 1e-12) {
    best = w;
    best_value = value;
    return;
  }
  if (value >= best_value - 1e-12) {
    const double dn = w.squaredNorm() - best.squaredNorm();
    if (dn < -1e-15 || (std::abs(dn) <= 1e-15 && lex_less(w, best))) {
      best = w;
      best_value = std::max(best_value, value);
    }
  }
}

inline void validate_allocation_inputs(const Eigen::VectorXd& mu,
                                       const CovEstimate& sigma, double upper) {
  const Eigen::Index n = mu.size();
  if (n < 1 || sigma.matrix.rows() != n || sigma.matrix.cols() != n) {
    throw data_error("ShapeMismatch: forecast vector and covariance disagree");
  }
  if (!(upper > 0.0)) {
    throw data_error("DomainError: per-asset cap must be positive");
  }
  if (static_cast<double>(n) * upper < 1.0) {
    throw numeric_error("Infeasible: " + std::to_string(n) +
                        " assets capped at " + std::to_string(upper) +
                        " cannot be fully invested");
  }
  if (!mu.allFinite()) {
    throw numeric_error("DomainError: forecast vector has non-finite entries");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma.matrix);
  if (llt.info() != Eigen::Success) {
    throw numeric_error("NotPD: covariance matrix failed its Cholesky factorization");
  }
}

}  // namespace detail

/**
 * Minimum-variance allocation under {Σw = 1, 0 ≤ w ≤ upper}: projected
 * gradient descent plus exact active-set polish on the (convex) quadratic,
 * certified by a unit-probe projected-gradient norm ≤ 1e-7 on trace-normalized
 * inputs.  `objective` reports the attained variance in input units.
 */
inline WeightVector min_variance_weights(const CovEstimate& sigma, double upper = 0.2) {
  const Eigen::Index n = sigma.matrix.rows();
  detail::validate_allocation_inputs(Eigen::VectorXd::Zero(n), sigma, upper);
  const Eigen::MatrixXd sig = sigma.matrix * (static_cast<double>(n) / sigma.matrix.trace());

  const auto value = [&](const Eigen::VectorXd& w) { return -w.dot(sig * w); };
  const auto grad = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    return -2.0 * (sig * w);
  };
  const auto polish = [&](const Eigen::VectorXd& w) {
    return detail::polish_minvar(sig, upper, w);
  };

  const double tol = 1e-7;
  Eigen::VectorXd best;
  double best_value = 0.0;
  const Eigen::VectorXd start =
      Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const Eigen::VectorXd w =
      detail::solve_from_start(start, value, grad, polish, upper, tol, 8, 400);
  detail::reduce_candidate(best, best_value, w, value(w));

  if (detail::stationarity_gap(best, grad(best), upper) > tol) {
    best = detail::solve_from_start(best, value, grad, polish, upper, tol, 12, 3000);
    if (detail::stationarity_gap(best, grad(best), upper) > tol) {
      throw numeric_error("NotConverged: minimum-variance stationarity check failed");
    }
  }

  WeightVector out;
  out.weights = best;
  out.objective = best.dot(sigma.matrix * best);
  return out;
}

/**
 * Constrained maximum-Sharpe allocation:
 *
 *     argmax (wᵀμ − rf) / √(wᵀΣw)   over   Σ w_i = 1,  0 ≤ w_i ≤ upper.
 *
 * Solved through the convex reformulation (minimize yᵀΣy with the excess
 * return pinned to 1 and the box expressed in y), implemented as projected
 * gradient ascent on the ratio with exact active-set polish, multi-start
 * (equal weights, the best-forecast vertex, three fixed pseudorandom points,
 * optionally `warm_start`), and a deterministic reduction: best objective,
 * then minimum norm, then lexicographic order.  Inputs are scale-normalized
 * internally (Sharpe is invariant), so the certificate — unit-probe projected
 * gradient norm ≤ 1e-7 — is meaningful at any input scale.
 *
 * When no feasible portfolio has positive excess return the ratio has no
 * useful maximizer; the minimum-variance portfolio is returned instead with
 * `min_variance_fallback` set.
 *
 * Throws Infeasible when n·upper < 1, NotPD when Σ fails Cholesky, and
 * DomainError on non-finite forecasts.
 */
inline WeightVector max_sharpe(const Eigen::VectorXd& mu, const CovEstimate& sigma,
                               double rf = 0.0, double upper = 0.2,
                               const Eigen::VectorXd* warm_start = nullptr) {
  detail::validate_allocation_inputs(mu, sigma, upper);
  const Eigen::Index n = mu.size();
  const Eigen::VectorXd excess = (mu.array() - rf).matrix();

  const double best_feasible_excess =
      excess.dot(detail::linear_vertex(excess, upper));
  if (best_feasible_excess <= 0.0) {
    WeightVector out = min_variance_weights(sigma, upper);
    out.min_variance_fallback = true;
    out.objective = sharpe_ratio(out.weights, mu, sigma.matrix, rf);
    return out;
  }

  const Eigen::VectorXd mu_hat = excess / excess.norm();
  const Eigen::MatrixXd sig = sigma.matrix * (static_cast<double>(n) / sigma.matrix.trace());

  const auto value = [&](const Eigen::VectorXd& w) {
    return mu_hat.dot(w) / std::sqrt(w.dot(sig * w));
  };
  const auto grad = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    const Eigen::VectorXd sw = sig * w;
    const double den = std::sqrt(w.dot(sw));
    const double num = mu_hat.dot(w);
    return mu_hat / den - (num / (den * den * den)) * sw;
  };
  const auto polish = [&](const Eigen::VectorXd& w) {
    return detail::polish_sharpe(mu_hat, sig, upper, w);
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  starts.push_back(detail::linear_vertex(excess, upper));
  RandomStream rs(0xA110CA7EULL, kStreamOptimizerStarts);
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd v(n);
    rs.fill_gaussian(v);
    starts.push_back(starts.front() + 0.5 * v);
  }
  if (warm_start != nullptr && warm_start->size() == n && warm_start->allFinite()) {
    starts.push_back(*warm_start);
  }

  const double tol = 1e-7;
  Eigen::VectorXd best;
  double best_value = 0.0;
  for (const Eigen::VectorXd& s : starts) {
    const Eigen::VectorXd w =
        detail::solve_from_start(s, value, grad, polish, upper, tol, 8, 400);
    detail::reduce_candidate(best, best_value, w, value(w));
  }

  if (detail::stationarity_gap(best, grad(best), upper) > tol) {
    best = detail::solve_from_start(best, value, grad, polish, upper, tol, 12, 3000);
    if (detail::stationarity_gap(best, grad(best), upper) > tol) {
      throw numeric_error("NotConverged: maximum-Sharpe stationarity check failed");
    }
  }

  WeightVector out;
  out.weights = best;
  out.objective = sharpe_ratio(best, mu, sigma.matrix, rf);
  return out;
}

}  // namespace sigfolio
