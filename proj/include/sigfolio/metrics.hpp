#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sigfolio/dates.hpp"
#include "sigfolio/errors.hpp"
#include "sigfolio/market_data.hpp"
#include "sigfolio/predictors.hpp"

namespace sigfolio {
namespace detail {

/**
 * Acklam's rational approximation to the inverse standard-normal CDF,
 * accurate to about 1.2e-9 absolute over (0, 1).
 */
inline double inverse_normal_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

/** Index of the last observation of each distinct calendar month, in order. */
inline std::vector<std::size_t> period_end_indices(const std::vector<Date>& calendar,
                                                   int (*key)(const Date&)) {
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < calendar.size(); ++i) {
    if (i > 0 && !(calendar[i - 1] < calendar[i])) {
      throw data_error("DomainError: calendar dates must be strictly increasing");
    }
    if (!ends.empty() && key(calendar[i]) == key(calendar[ends.back()])) {
      ends.back() = i;
    } else {
      ends.push_back(i);
    }
  }
  return ends;
}

/** Period-over-period returns at the boundary indices; the first period is the base. */
inline std::vector<double> boundary_returns(const std::vector<double>& values,
                                            const std::vector<std::size_t>& ends) {
  std::vector<double> out;
  out.reserve(ends.size() - 1);
  for (std::size_t m = 1; m < ends.size(); ++m) {
    const double base = values[ends[m - 1]];
    if (!(base > 0.0)) {
      throw data_error("DomainError: period returns need positive values");
    }
    out.push_back(values[ends[m]] / base - 1.0);
  }
  return out;
}

}  // namespace detail

/** (1 + r)^(252/t) − 1: a t-day total return restated at the annual scale. */
inline double annualized_return(double total_return, int days) {
  if (!(total_return > -1.0)) {
    throw data_error("DomainError: total return must exceed -1, got " +
                     std::to_string(total_return));
  }
  if (days < 1) {
    throw data_error("DomainError: horizon must cover at least one day");
  }
  return std::pow(1.0 + total_return, 252.0 / static_cast<double>(days)) - 1.0;
}

/** (r_a − rf) / σ_a with σ_a the √252-scaled daily volatility.  Throws ZeroVol. */
inline double annualized_sharpe(double annual_return, double annual_vol, double rf = 0.0) {
  if (!(annual_vol > 0.0)) {
    throw numeric_error("ZeroVol: annualized volatility must be positive");
  }
  return (annual_return - rf) / annual_vol;
}

/** Simple daily returns v[k+1]/v[k] − 1 of a positive value series. */
inline std::vector<double> simple_returns(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw data_error("WindowTooShort: need at least two values for returns");
  }
  std::vector<double> out;
  out.reserve(values.size() - 1);
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    if (!(values[k] > 0.0)) {
      throw data_error("DomainError: value series must stay positive");
    }
    out.push_back(values[k + 1] / values[k] - 1.0);
  }
  return out;
}

/** Annualized return of a daily value series (day count = observations − 1). */
inline double annualized_return_from_values(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw data_error("WindowTooShort: need at least two values");
  }
  if (!(values.front() > 0.0)) {
    throw data_error("DomainError: value series must start positive");
  }
  return annualized_return(values.back() / values.front() - 1.0,
                           static_cast<int>(values.size()) - 1);
}

/**
 * Annualized Sharpe of a daily value series: total return annualized over the
 * series length, volatility the sample standard deviation of daily simple
 * returns times √252.  Throws ZeroVol on a constant series.
 */
inline double annualized_sharpe_from_values(const std::vector<double>& values,
                                            double rf = 0.0) {
  const std::vector<double> rets = simple_returns(values);
  if (rets.size() < 2) {
    throw data_error("WindowTooShort: need at least two daily returns");
  }
  double mean = 0.0;
  for (const double r : rets) mean += r;
  mean /= static_cast<double>(rets.size());
  double ss = 0.0;
  for (const double r : rets) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / static_cast<double>(rets.size() - 1));
  return annualized_sharpe(annualized_return_from_values(values), sd * std::sqrt(252.0), rf);
}

struct InformationCoefficient {
  Eigen::VectorXd per_asset;
  double mean = 0.0;
};

/**
 * Pearson correlation between forecasts and the returns they targeted, per
 * asset, plus the cross-asset mean.  Alignment comes from the forecast
 * series' first_index into the return panel's row numbering.
 *
 * Throws WindowTooShort below 3 overlapping days, IndexMismatch when the
 * series does not fit inside the panel, and DegenerateSeries when either
 * side of a correlation is constant.
 */
inline InformationCoefficient information_coefficient(const ForecastSeries& forecasts,
                                                      const ReturnPanel& realized) {
  const Eigen::Index m = forecasts.predictions.rows();
  const Eigen::Index n = forecasts.predictions.cols();
  if (n < 1 || realized.returns.cols() != n) {
    throw data_error("ShapeMismatch: forecast and return panels disagree on assets");
  }
  if (forecasts.first_index < 0 ||
      forecasts.first_index + m > realized.returns.rows()) {
    throw data_error("IndexMismatch: forecast series does not fit in the panel");
  }
  if (m < 3) {
    throw data_error("WindowTooShort: information coefficient needs >= 3 days");
  }
  const Eigen::MatrixXd actual = realized.returns.middleRows(forecasts.first_index, m);

  InformationCoefficient out;
  out.per_asset.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd fc =
        forecasts.predictions.col(j).array() - forecasts.predictions.col(j).mean();
    const Eigen::VectorXd rc = actual.col(j).array() - actual.col(j).mean();
    const double nf = fc.squaredNorm();
    const double nr = rc.squaredNorm();
    if (nf == 0.0 || nr == 0.0) {
      throw numeric_error("DegenerateSeries: constant series for asset " +
                          std::to_string(j));
    }
    out.per_asset(j) = fc.dot(rc) / std::sqrt(nf * nr);
  }
  out.mean = out.per_asset.mean();
  return out;
}

/**
 * Years of data needed before a drift estimate's two-sided confidence
 * interval shrinks to ±half_width: (z·σ / half_width)².
 *
 * The usual confidences use the conventional two-decimal z-table values
 * (0.90 → 1.645, 0.95 → 1.96, 0.98 → 2.326, 0.99 → 2.576), matching how such
 * horizons are quoted; anything else goes through the generic quantile.
 */
inline double drift_horizon(double sigma, double half_width, double confidence) {
  if (!(sigma > 0.0) || !(half_width > 0.0) ||
      !(confidence > 0.0 && confidence < 1.0)) {
    throw data_error(
        "DomainError: drift_horizon needs sigma > 0, half_width > 0 and "
        "confidence in (0,1)");
  }
  double z;
  if (confidence == 0.90) {
    z = 1.645;
  } else if (confidence == 0.95) {
    z = 1.96;
  } else if (confidence == 0.98) {
    z = 2.326;
  } else if (confidence == 0.99) {
    z = 2.576;
  } else {
    z = detail::inverse_normal_cdf(0.5 * (1.0 + confidence));
  }
  const double ratio = z * sigma / half_width;
  return ratio * ratio;
}

/**
 * Divides each consecutive block of segment_days by the block's first value,
 * restarting the series at 1.0 at every block boundary (for long-horizon
 * comparison plots).
 */
inline std::vector<double> segment_normalize(const std::vector<double>& values,
                                             int segment_days) {
  if (values.empty()) {
    throw data_error("ShapeMismatch: cannot normalize an empty series");
  }
  if (segment_days < 1) {
    throw data_error("DomainError: segment length must be at least one day");
  }
  std::vector<double> out;
  out.reserve(values.size());
  double base = 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i % static_cast<std::size_t>(segment_days) == 0) {
      if (!(values[i] > 0.0)) {
        throw data_error("DomainError: segment bases must be positive");
      }
      base = values[i];
    }
    out.push_back(values[i] / base);
  }
  return out;
}

/**
 * Month-over-month returns of a value series at month-end boundaries; the
 * first calendar month only provides the base.  Throws TooShort when the
 * calendar spans fewer than two months.
 */
inline std::vector<double> monthly_returns(const std::vector<double>& values,
                                           const std::vector<Date>& calendar) {
  if (values.size() != calendar.size() || values.empty()) {
    throw data_error("ShapeMismatch: values and calendar must align");
  }
  const std::vector<std::size_t> ends =
      detail::period_end_indices(calendar, &month_key);
  if (ends.size() < 2) {
    throw data_error("TooShort: need at least two calendar months");
  }
  return detail::boundary_returns(values, ends);
}

/** Fraction of calendar months where series a strictly out-returns series b. */
inline double monthly_outperformance(const std::vector<double>& a,
                                     const std::vector<double>& b,
                                     const std::vector<Date>& calendar) {
  const std::vector<double> ra = monthly_returns(a, calendar);
  const std::vector<double> rb = monthly_returns(b, calendar);
  int wins = 0;
  for (std::size_t m = 0; m < ra.size(); ++m) {
    if (ra[m] > rb[m]) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(ra.size());
}

struct QuarterDiff {
  std::string label;  // e.g. "2007Q3"
  double diff = 0.0;  // quarterly return of a minus quarterly return of b
};

/** Quarterly return differences a − b at quarter-end boundaries. */
inline std::vector<QuarterDiff> quarterly_return_diffs(const std::vector<double>& a,
                                                       const std::vector<double>& b,
                                                       const std::vector<Date>& calendar) {
  if (a.size() != calendar.size() || b.size() != calendar.size() || a.empty()) {
    throw data_error("ShapeMismatch: values and calendar must align");
  }
  const std::vector<std::size_t> ends =
      detail::period_end_indices(calendar, &quarter_key);
  if (ends.size() < 2) {
    throw data_error("TooShort: need at least two calendar quarters");
  }
  const std::vector<double> ra = detail::boundary_returns(a, ends);
  const std::vector<double> rb = detail::boundary_returns(b, ends);
  std::vector<QuarterDiff> out;
  out.reserve(ra.size());
  for (std::size_t q = 0; q < ra.size(); ++q) {
    out.push_back({quarter_label(calendar[ends[q + 1]]), ra[q] - rb[q]});
  }
  return out;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<int> counts;    // per bin; the top edge is inclusive
};

/** Uniform-bin histogram over [min, max]; a zero-width range widens to 1. */
inline Histogram histogram_counts(const std::vector<double>& data, int bins) {
  if (data.empty()) {
    throw data_error("ShapeMismatch: cannot bin an empty data set");
  }
  if (bins < 1) {
    throw data_error("DomainError: need at least one bin");
  }
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double lo = *lo_it;
  const double hi = (*hi_it > lo) ? *hi_it : lo + 1.0;
  Histogram h;
  h.edges.reserve(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) {
    h.edges.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins));
  }
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const double x : data) {
    const int idx = std::min(bins - 1,
                             static_cast<int>(std::floor((x - lo) / (hi - lo) *
                                                         static_cast<double>(bins))));
    ++h.counts[static_cast<std::size_t>(std::max(0, idx))];
  }
  return h;
}

}  // namespace sigfolio
