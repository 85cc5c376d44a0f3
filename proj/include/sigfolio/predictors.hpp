#pragma once

#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "sigfolio/csv.hpp"
#include "sigfolio/dates.hpp"
#include "sigfolio/errors.hpp"
#include "sigfolio/market_data.hpp"
#include "sigfolio/reservoir.hpp"

namespace sigfolio {

/** Multi-target ridge coefficients; intercept has size 0 when disabled. */
struct RidgeModel {
  Eigen::MatrixXd coefficients;  // p x n_targets
  Eigen::VectorXd intercept;     // n_targets, or empty
  double alpha = 1e-3;

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = coefficients.transpose() * x;
    if (intercept.size() != 0) y += intercept;
    return y;
  }
};

/**
 * Ridge regression: minimizes ||F W - Y||^2 + alpha ||W||^2 per target.
 * Without an intercept the coefficients solve (F'F + alpha I) W = F'Y.
 * With one, the same system is solved on column-centered F and Y and the
 * intercept absorbs the means (the intercept itself is not penalized).
 */
inline RidgeModel ridge_fit(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Y, double alpha,
                            bool with_intercept = false) {
  if (F.rows() != Y.rows())
    throw data_error("ShapeMismatch: " + std::to_string(F.rows()) + " feature rows vs " +
                     std::to_string(Y.rows()) + " target rows");
  if (F.rows() < 1) throw data_error("InsufficientHistory: no training rows");
  if (!(alpha > 0.0)) throw data_error("ShapeMismatch: alpha must be > 0");

  const Eigen::Index p = F.cols();
  RidgeModel model;
  model.alpha = alpha;
  if (!with_intercept) {
    Eigen::MatrixXd G = F.transpose() * F;
    G.diagonal().array() += alpha;
    model.coefficients = Eigen::LLT<Eigen::MatrixXd>(G).solve(F.transpose() * Y);
  } else {
    const Eigen::RowVectorXd f_mean = F.colwise().mean();
    const Eigen::RowVectorXd y_mean = Y.colwise().mean();
    const Eigen::MatrixXd Fc = F.rowwise() - f_mean;
    const Eigen::MatrixXd Yc = Y.rowwise() - y_mean;
    Eigen::MatrixXd G = Fc.transpose() * Fc;
    G.diagonal().array() += alpha;
    model.coefficients = Eigen::LLT<Eigen::MatrixXd>(G).solve(Fc.transpose() * Yc);
    model.intercept = (y_mean - f_mean * model.coefficients).transpose();
  }
  if (model.coefficients.rows() != p) throw numeric_error("ShapeMismatch: ridge solve failed");
  return model;
}

/**
 * One-day-ahead forecasts.  Row j predicts return row (first_index + j);
 * a prediction for index t only ever uses data from rows strictly before t.
 */
struct ForecastSeries {
  Eigen::MatrixXd predictions;  // rows = decision days, cols = assets
  int first_index = 0;
};

namespace detail {

/**
 * Shared expanding-window protocol.  `features` row j must be built from
 * return rows [j, j + t_w) only.  For each decision index t in
 * [t_s + 1, T - 1] the model is fit on the pairs
 *
 *   (feature row i - t_w  ->  return row i)    for i in [t_w, t),
 *
 * i.e. t - t_w pairs whose targets all precede t, and then predicts return
 * row t from feature row t - t_w.  Refitting happens every `refit_every`
 * decision days (1 = daily).
 *
 * The normal equations are maintained incrementally: each new pair adds a
 * rank-one update to running Gram/cross-moment sums, and a refit solves the
 * same (optionally centered) penalized system as ridge_fit from those sums.
 * Because rows are accumulated strictly in index order, truncating the panel
 * leaves every shared prediction bitwise unchanged; agreement with a dense
 * from-scratch solve is to solver precision (~1e-10) rather than bitwise.
 */
inline ForecastSeries expanding_forecast(const Eigen::MatrixXd& features,
                                         const Eigen::MatrixXd& returns, int t_w, int t_s,
                                         double alpha, bool with_intercept, int refit_every) {
  const Eigen::Index T = returns.rows();
  if (t_w < 1 || t_s < t_w)
    throw data_error("InsufficientHistory: need t_s >= t_w >= 1, got t_s=" +
                     std::to_string(t_s) + " t_w=" + std::to_string(t_w));
  if (refit_every < 1) throw data_error("ShapeMismatch: refit_every must be >= 1");
  if (!(alpha > 0.0)) throw data_error("ShapeMismatch: alpha must be > 0");
  if (t_s + 1 > T - 1)
    throw data_error("InsufficientHistory: burn-in " + std::to_string(t_s) +
                     " leaves no forecast days in " + std::to_string(T) + " return rows");
  if (features.rows() != T - t_w + 1)
    throw data_error("IndexMismatch: " + std::to_string(features.rows()) +
                     " feature rows for " + std::to_string(T) + " return rows and window " +
                     std::to_string(t_w));

  const Eigen::Index p = features.cols();
  const Eigen::Index n = returns.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);   // lower triangle of sum f f'
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(p, n);  // sum f y'
  Eigen::VectorXd f_sum = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd y_sum = Eigen::VectorXd::Zero(n);
  Eigen::Index m = 0;  // pairs absorbed so far; targets are rows [t_w, t_w + m)

  ForecastSeries out;
  out.first_index = t_s + 1;
  out.predictions.resize(T - 1 - t_s, returns.cols());
  RidgeModel model;
  model.alpha = alpha;
  for (Eigen::Index t = t_s + 1; t <= T - 1; ++t) {
    while (m < t - t_w) {
      const Eigen::VectorXd f = features.row(m).transpose();
      const Eigen::VectorXd y = returns.row(t_w + m).transpose();
      gram.selfadjointView<Eigen::Lower>().rankUpdate(f);
      cross.noalias() += f * y.transpose();
      f_sum += f;
      y_sum += y;
      ++m;
    }
    if ((t - (t_s + 1)) % refit_every == 0) {
      Eigen::MatrixXd G = gram.selfadjointView<Eigen::Lower>();
      Eigen::MatrixXd B = cross;
      if (with_intercept) {
        const double inv_m = 1.0 / static_cast<double>(m);
        G.noalias() -= (f_sum * f_sum.transpose()) * inv_m;
        B.noalias() -= f_sum * (y_sum.transpose() * inv_m);
      }
      G.diagonal().array() += alpha;
      model.coefficients = Eigen::LLT<Eigen::MatrixXd>(G).solve(B);
      if (with_intercept)
        model.intercept =
            (y_sum - model.coefficients.transpose() * f_sum) / static_cast<double>(m);
      else
        model.intercept.resize(0);
    }
    out.predictions.row(t - (t_s + 1)) =
        model.predict(features.row(t - t_w).transpose()).transpose();
  }
  return out;
}

}  // namespace detail

/**
 * Reservoir forecasts: expanding-window ridge from signature features to
 * next-day log returns.  `features` must come from rolling_features over the
 * same return panel (feature row j covers return rows [j, j + t_w)).
 */
inline ForecastSeries reservoir_forecast(const FeatureMatrix& features,
                                         const ReturnPanel& returns, int t_s, double alpha,
                                         bool with_intercept = true, int refit_every = 1) {
  return detail::expanding_forecast(features.rows, returns.returns, features.t_w, t_s, alpha,
                                    with_intercept, refit_every);
}

/**
 * Linear benchmark with the identical protocol: the feature vector at index
 * t is the flattened window of the previous t_w return rows (day-major).
 */
inline ForecastSeries linreg_forecast(const ReturnPanel& returns, int t_w, int t_s, double alpha,
                                      bool with_intercept = true, int refit_every = 1) {
  const Eigen::Index T = returns.returns.rows();
  const Eigen::Index n = returns.returns.cols();
  if (T < t_w) throw data_error("InsufficientHistory: fewer return rows than t_w");
  Eigen::MatrixXd lagged(T - t_w + 1, t_w * n);
  for (Eigen::Index j = 0; j + t_w <= T; ++j)
    for (Eigen::Index k = 0; k < t_w; ++k)
      lagged.block(j, k * n, 1, n) = returns.returns.row(j + k);
  return detail::expanding_forecast(lagged, returns.returns, t_w, t_s, alpha, with_intercept,
                                    refit_every);
}

/**
 * Momentum benchmark: the forecast for return row t is the mean of the
 * trailing t_w return rows [t - t_w, t).  Defined from t = t_w onward.
 */
inline ForecastSeries momentum_forecast(const ReturnPanel& returns, int t_w) {
  const Eigen::Index T = returns.returns.rows();
  if (t_w < 1) throw data_error("ShapeMismatch: t_w must be >= 1");
  if (T <= t_w) throw data_error("InsufficientHistory: fewer return rows than t_w + 1");
  ForecastSeries out;
  out.first_index = t_w;
  out.predictions.resize(T - t_w, returns.returns.cols());
  // Each window is copied out before the reduction so the means depend only
  // on the values, not on the panel's memory layout.
  for (Eigen::Index t = t_w; t <= T - 1; ++t) {
    const Eigen::MatrixXd window = returns.returns.middleRows(t - t_w, t_w);
    out.predictions.row(t - t_w) = window.colwise().mean();
  }
  return out;
}

/**
 * Entrywise mean of aligned forecast series, accumulated in list order so
 * the result does not depend on how the inputs were produced or scheduled.
 */
inline ForecastSeries average_forecasts(const std::vector<ForecastSeries>& list) {
  if (list.empty()) throw data_error("ShapeMismatch: no forecast series to average");
  ForecastSeries out = list.front();
  for (std::size_t s = 1; s < list.size(); ++s) {
    const ForecastSeries& f = list[s];
    if (f.first_index != out.first_index || f.predictions.rows() != out.predictions.rows() ||
        f.predictions.cols() != out.predictions.cols())
      throw data_error("IndexMismatch: forecast series " + std::to_string(s) +
                       " is not aligned with the first");
    out.predictions += f.predictions;
  }
  out.predictions /= static_cast<double>(list.size());
  return out;
}

/** Tidy CSV export (date, asset, prediction) given the return-panel dates. */
inline std::string forecasts_to_csv(const ForecastSeries& f,
                                    const std::vector<Date>& return_dates,
                                    const std::vector<std::string>& tickers) {
  std::string out = "date,asset,prediction\n";
  for (Eigen::Index i = 0; i < f.predictions.rows(); ++i) {
    const std::size_t di = static_cast<std::size_t>(f.first_index + i);
    if (di >= return_dates.size())
      throw data_error("IndexMismatch: forecast index beyond the date axis");
    for (Eigen::Index j = 0; j < f.predictions.cols(); ++j)
      out += format_date(return_dates[di]) + "," + tickers[static_cast<std::size_t>(j)] + "," +
             format_number(f.predictions(i, j)) + "\n";
  }
  return out;
}

}  // namespace sigfolio
