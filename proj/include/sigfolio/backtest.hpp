#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sigfolio/allocator.hpp"
#include "sigfolio/dates.hpp"
#include "sigfolio/errors.hpp"
#include "sigfolio/market_data.hpp"
#include "sigfolio/metrics.hpp"
#include "sigfolio/predictors.hpp"
#include "sigfolio/reservoir.hpp"
#include "sigfolio/risk.hpp"

namespace sigfolio {

/** Proportional trading friction: cost = lambda * sum_i |share change_i|. */
struct CostModel {
  double lambda = 0.0;
};

/**
 * Trading-gate polarity.  The gate compares the max-norm move between the
 * current and previous forecast vectors against tau:
 *   - eq_below:    trade only while the move is strictly below tau
 *                  (forecasts have settled);
 *   - prose_above: trade only when the move is at least tau
 *                  (forecasts have shifted enough to act on).
 */
enum class GateMode { eq_below, prose_above };

/** Turnover-mitigation settings applied between the allocator and the book. */
struct PostProcessParams {
  double tau = 0.0;                       // gate threshold on the forecast move
  int k = 1;                              // share-smoothing span (1 = none)
  GateMode mode = GateMode::prose_above;  // tau = 0 here means "always trade"
};

/** One decision day in a strategy's book. */
struct LedgerEntry {
  int day = 0;                     // return-row index of the decision
  Date date;                       // calendar date of that row
  Eigen::VectorXd target_weights;  // allocator output, before post-processing
  Eigen::VectorXd realized_shares; // holdings carried out of the day
  double trade_cost = 0.0;
  double portfolio_value = 0.0;    // post-trade, post-cost value on the day
  bool traded = false;             // gate outcome (first day always trades)
  bool fallback_flag = false;      // minimum-variance fallback engaged
};

/** A single strategy x cost-rate path through the backtest. */
struct StrategyRun {
  std::string strategy;
  double lambda = 0.0;
  std::vector<double> values;  // one per decision day, plus the final mark
  std::vector<LedgerEntry> ledger;
  std::vector<double> segment_normalized;       // values rebased per segment
  std::vector<QuarterDiff> quarterly_vs_equal;  // vs 1/n at the same lambda
};

/** Summary row of the metric table; NaN marks an undefined entry. */
struct StrategyMetrics {
  std::string strategy;
  double lambda = 0.0;
  double annual_return = std::numeric_limits<double>::quiet_NaN();
  double annual_sharpe = std::numeric_limits<double>::quiet_NaN();
  double mean_ic = std::numeric_limits<double>::quiet_NaN();
  double monthly_win_fraction = std::numeric_limits<double>::quiet_NaN();
};

/** Everything run_backtest needs beyond the price panel itself. */
struct BacktestParams {
  int t_w = 22;                // forecast feature window (return rows)
  int t_c = 252;               // trailing covariance window (return rows)
  int t_s = -1;                // last burn-in return row; -1 = resolve below
  double burn_fraction = 0.10; // t_s = max(ceil(burn * T), t_c, t_w) when t_s < 0
  double alpha = 1e-3;         // ridge penalty
  bool intercept = false;
  int n_s = 20;                // reservoir repetitions averaged per decision
  std::uint64_t master_seed = 0;  // repetition i uses master_seed + i
  ReservoirSpec reservoir;     // t_w and seed fields are overwritten per run
  AugmentSpec augment;
  double rf = 0.0;             // daily risk-free rate fed to the allocator; the
                               // summary table compounds it to an annual rate
  double upper = 0.2;          // per-asset weight cap
  std::vector<double> lambdas = {0.0};
  PostProcessParams post;
  int refit_every = 1;
  int segment_days = 504;      // rebasing span of the segment-normalized view
  int jobs = 1;                // accepted for CLI symmetry; order of evaluation
                               // is fixed, so results never depend on it
};

/** Allocator decisions for every day, shared across the cost-rate grid. */
struct TargetSeries {
  Eigen::MatrixXd weights;     // row t - first_index = weights chosen on day t
  std::vector<char> fallback;  // 1 where the minimum-variance fallback fired
  int first_index = 0;
};

/** Full backtest output: runs over the strategy x lambda grid plus metrics. */
struct BacktestResult {
  int t_s = 0;
  std::vector<Date> dates;  // one per value entry of every run
  std::vector<StrategyRun> runs;  // per lambda: reservoir, linreg, momentum, one_over_n
  std::vector<StrategyMetrics> metrics;          // same order as runs
  std::vector<std::vector<double>> per_seed_values;  // reservoir repetitions at
                                                     // lambdas.front()
  std::vector<double> per_seed_ic;  // mean IC of each repetition's forecasts
  ForecastSeries reservoir_forecasts;  // seed-averaged; lets callers re-run the
                                       // gate/smoothing grid without refitting
  TargetSeries reservoir_targets;      // cost-rate-independent allocator output
};

namespace detail {

/** Left-to-right accumulation so totals never depend on vectorization. */
inline double seq_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) sum += a(i) * b(i);
  return sum;
}

/** Re-anchors a forecast series at a later first index. */
inline ForecastSeries slice_forecasts(const ForecastSeries& f, int first, int count) {
  if (first < f.first_index || count < 0 ||
      first + count > f.first_index + static_cast<int>(f.predictions.rows()))
    throw data_error("IndexMismatch: slice [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") not covered by forecasts starting at " +
                     std::to_string(f.first_index));
  ForecastSeries out;
  out.first_index = first;
  out.predictions = f.predictions.middleRows(first - f.first_index, count).eval();
  return out;
}

inline void check_post(const PostProcessParams& post) {
  if (!(post.tau >= 0.0)) throw data_error("DomainError: gate threshold tau must be >= 0");
  if (post.k < 1) throw data_error("DomainError: smoothing span k must be >= 1");
}

}  // namespace detail

/**
 * Cost of moving the book from prev_shares to new_shares:
 * lambda * sum_i |new_i - prev_i|, accumulated in asset order.  Shares are in
 * first-day-normalized price units, so lambda reads as cost per unit of
 * turnover at the starting price level.
 */
inline double apply_costs(const Eigen::VectorXd& prev_shares, const Eigen::VectorXd& new_shares,
                          double lambda) {
  if (prev_shares.size() != new_shares.size())
    throw data_error("ShapeMismatch: " + std::to_string(prev_shares.size()) + " vs " +
                     std::to_string(new_shares.size()) + " share entries");
  if (!(lambda >= 0.0)) throw data_error("DomainError: cost rate lambda must be >= 0");
  double turnover = 0.0;
  for (Eigen::Index i = 0; i < prev_shares.size(); ++i)
    turnover += std::abs(new_shares(i) - prev_shares(i));
  return lambda * turnover;
}

/** Gate decision for one day given consecutive forecast vectors. */
inline bool gate_allows_trade(const Eigen::VectorXd& mu_now, const Eigen::VectorXd& mu_prev,
                              const PostProcessParams& post) {
  detail::check_post(post);
  if (mu_now.size() != mu_prev.size())
    throw data_error("ShapeMismatch: forecast vectors of size " + std::to_string(mu_now.size()) +
                     " vs " + std::to_string(mu_prev.size()));
  const double move = (mu_now - mu_prev).cwiseAbs().maxCoeff();
  return post.mode == GateMode::eq_below ? (move < post.tau) : (move >= post.tau);
}

/** Result of one post-processing + trading step. */
struct TradeOutcome {
  Eigen::VectorXd shares;  // realized holdings after the trade
  double cost = 0.0;
  double value = 0.0;      // post-cost portfolio value
  bool traded = false;
};

/**
 * Turns the allocator's target weights into realized holdings:
 *
 *   1. proposal — target-weight shares at the full marked value when the gate
 *      allows a trade, otherwise yesterday's holdings;
 *   2. smoothing — arithmetic mean of the proposal with the last k - 1
 *      realized share vectors (fewer while the history is still shorter);
 *   3. renormalization — costs are charged on the full-value version of the
 *      trade and the final shares are scaled so the position value equals the
 *      post-cost portfolio value (the book stays fully invested and
 *      self-financing).
 *
 * `recent_shares` holds realized share vectors, most recent last.  An empty
 * history means the initial acquisition: it always trades and—by
 * convention—pays no cost.
 */
inline TradeOutcome postprocess_trade(const Eigen::VectorXd& target_weights,
                                      const Eigen::VectorXd& prices_now, double marked_value,
                                      const std::deque<Eigen::VectorXd>& recent_shares,
                                      bool trade, const PostProcessParams& post, double lambda) {
  detail::check_post(post);
  if (target_weights.size() != prices_now.size())
    throw data_error("ShapeMismatch: " + std::to_string(target_weights.size()) +
                     " weights vs " + std::to_string(prices_now.size()) + " prices");
  if (!(lambda >= 0.0)) throw data_error("DomainError: cost rate lambda must be >= 0");
  if (!(marked_value > 0.0))
    throw numeric_error("DomainError: marked portfolio value " +
                        std::to_string(marked_value) + " is not positive");

  const bool first = recent_shares.empty();
  Eigen::VectorXd proposal;
  if (first || trade) {
    proposal.resize(target_weights.size());
    for (Eigen::Index i = 0; i < proposal.size(); ++i) {
      if (!(prices_now(i) > 0.0))
        throw data_error("DomainError: nonpositive price in trading step");
      proposal(i) = target_weights(i) * marked_value / prices_now(i);
    }
  } else {
    proposal = recent_shares.back();
  }

  Eigen::VectorXd smoothed = proposal;
  int used = 1;
  for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(post.k) && j < recent_shares.size();
       ++j) {
    smoothed += recent_shares[recent_shares.size() - 1 - j];
    ++used;
  }
  smoothed /= static_cast<double>(used);

  const double position_value = detail::seq_dot(smoothed, prices_now);
  if (!(position_value > 0.0))
    throw numeric_error("DomainError: smoothed position value " +
                        std::to_string(position_value) + " is not positive");

  TradeOutcome out;
  const Eigen::VectorXd full_trade = smoothed * (marked_value / position_value);
  out.cost = first ? 0.0 : apply_costs(recent_shares.back(), full_trade, lambda);
  out.value = marked_value - out.cost;
  out.shares = smoothed * (out.value / position_value);
  out.traded = first || trade;
  return out;
}

/**
 * Allocator decisions for every decision day t in [t_s + 1, T - 1]: the
 * expected-return vector is the forecast for day t and the covariance is the
 * shrunk estimate over the trailing t_c return rows [t - t_c, t).  Warm
 * starts chain day to day.  Decisions depend only on forecasts and returns,
 * never on costs, so one series serves the whole lambda grid.
 * `cov_series` can supply precomputed estimates (entry t - t_s - 1 for day t).
 */
inline TargetSeries compute_targets(const ReturnPanel& returns, const ForecastSeries& forecasts,
                                    int t_s, int t_c, double rf, double upper,
                                    const std::vector<CovEstimate>* cov_series = nullptr) {
  const Eigen::Index T = returns.returns.rows();
  const Eigen::Index n = returns.returns.cols();
  if (t_c < 2) throw data_error("DomainError: covariance window t_c must be >= 2");
  if (t_s + 1 < t_c)
    throw data_error("HistoryTooShort: first decision day " + std::to_string(t_s + 1) +
                     " has fewer than t_c=" + std::to_string(t_c) + " prior return rows");
  if (t_s + 1 > T - 1)
    throw data_error("HistoryTooShort: burn-in " + std::to_string(t_s) +
                     " leaves no decision days in " + std::to_string(T) + " return rows");
  if (forecasts.predictions.cols() != n)
    throw data_error("ShapeMismatch: " + std::to_string(forecasts.predictions.cols()) +
                     " forecast columns for " + std::to_string(n) + " assets");
  if (forecasts.first_index > t_s + 1 ||
      forecasts.first_index + forecasts.predictions.rows() < T)
    throw data_error("IndexMismatch: forecasts cover [" +
                     std::to_string(forecasts.first_index) + ", " +
                     std::to_string(forecasts.first_index + forecasts.predictions.rows()) +
                     ") but decisions need [" + std::to_string(t_s + 1) + ", " +
                     std::to_string(T) + ")");
  const Eigen::Index days = T - 1 - t_s;
  if (cov_series && static_cast<Eigen::Index>(cov_series->size()) != days)
    throw data_error("ShapeMismatch: " + std::to_string(cov_series->size()) +
                     " covariance estimates for " + std::to_string(days) + " decision days");

  TargetSeries out;
  out.first_index = t_s + 1;
  out.weights.resize(days, n);
  out.fallback.assign(static_cast<std::size_t>(days), 0);
  Eigen::VectorXd warm;
  for (Eigen::Index t = t_s + 1; t <= T - 1; ++t) {
    const Eigen::Index row = t - (t_s + 1);
    const Eigen::VectorXd mu =
        forecasts.predictions.row(t - forecasts.first_index).transpose();
    const CovEstimate cov =
        cov_series ? (*cov_series)[static_cast<std::size_t>(row)]
                   : estimate_covariance(returns.returns.middleRows(t - t_c, t_c));
    const WeightVector w = max_sharpe(mu, cov, rf, upper, warm.size() ? &warm : nullptr);
    out.weights.row(row) = w.weights.transpose();
    out.fallback[static_cast<std::size_t>(row)] = w.min_variance_fallback ? 1 : 0;
    warm = w.weights;
  }
  return out;
}

/**
 * Daily accounting loop for one strategy at one cost rate.
 *
 * Day t0 = t_s + 1 starts with capital 1.0 and a cost-free initial
 * acquisition.  Each later decision day marks the held book at today's
 * prices, gates on the forecast move (days without a previous forecast trade
 * unconditionally), post-processes, and records the post-cost value.  After
 * the last decision day the book is marked once more at the final price row.
 * The accounting identity
 *
 *   value_t = sum_i shares_{t-1,i} * price_{t,i} - trade_cost_t
 *
 * holds exactly by construction.
 *
 * `targets` null means the daily-rebalanced 1/n benchmark, which skips the
 * gate and smoothing entirely (but still pays costs); `forecasts` feeds only
 * the gate and may be null exactly when `targets` is.
 */
inline StrategyRun run_ledger(const std::string& name, const PricePanel& prices,
                              const ForecastSeries* forecasts, const TargetSeries* targets,
                              int t_s, double lambda, const PostProcessParams& post,
                              double upper = 0.2) {
  const Eigen::Index N = prices.prices.rows();
  const Eigen::Index n = prices.prices.cols();
  const Eigen::Index T = N - 1;
  detail::check_post(post);
  if (!(lambda >= 0.0)) throw data_error("DomainError: cost rate lambda must be >= 0");
  if (static_cast<Eigen::Index>(prices.dates.size()) != N)
    throw data_error("ShapeMismatch: " + std::to_string(prices.dates.size()) + " dates for " +
                     std::to_string(N) + " price rows");
  if (t_s + 1 > T - 1)
    throw data_error("HistoryTooShort: burn-in " + std::to_string(t_s) +
                     " leaves no decision days in " + std::to_string(T) + " return rows");
  if ((targets == nullptr) != (forecasts == nullptr))
    throw data_error("IndexMismatch: forecasts and targets must be supplied together");
  if (targets) {
    if (targets->first_index > t_s + 1 ||
        targets->first_index + targets->weights.rows() < T)
      throw data_error("IndexMismatch: target series does not cover the decision days");
    if (targets->weights.cols() != n)
      throw data_error("ShapeMismatch: " + std::to_string(targets->weights.cols()) +
                       " target columns for " + std::to_string(n) + " assets");
    if (forecasts->first_index > t_s + 1 ||
        forecasts->first_index + forecasts->predictions.rows() < T)
      throw data_error("IndexMismatch: forecast series does not cover the decision days");
  }

  // The 1/n benchmark is exempt from the gate and smoothing by definition.
  const PostProcessParams effective = targets ? post : PostProcessParams{};
  const Eigen::VectorXd equal =
      targets ? Eigen::VectorXd() : equal_weights(static_cast<int>(n), upper).weights;

  StrategyRun run;
  run.strategy = name;
  run.lambda = lambda;
  run.values.reserve(static_cast<std::size_t>(T - t_s));
  run.ledger.reserve(static_cast<std::size_t>(T - 1 - t_s));

  std::deque<Eigen::VectorXd> recent;  // realized shares, most recent last
  Eigen::VectorXd mu_prev;
  for (Eigen::Index t = t_s + 1; t <= T - 1; ++t) {
    const Eigen::VectorXd price_t = prices.prices.row(t).transpose();
    const double marked = recent.empty() ? 1.0 : detail::seq_dot(recent.back(), price_t);

    Eigen::VectorXd target;
    bool fallback = false;
    bool trade = true;
    if (targets) {
      target = targets->weights.row(t - targets->first_index).transpose();
      fallback = targets->fallback[static_cast<std::size_t>(t - targets->first_index)] != 0;
      const Eigen::VectorXd mu =
          forecasts->predictions.row(t - forecasts->first_index).transpose();
      if (mu_prev.size()) trade = gate_allows_trade(mu, mu_prev, effective);
      mu_prev = mu;
    } else {
      target = equal;
    }

    const TradeOutcome outcome =
        postprocess_trade(target, price_t, marked, recent, trade, effective, lambda);

    LedgerEntry entry;
    entry.day = static_cast<int>(t);
    entry.date = prices.dates[static_cast<std::size_t>(t)];
    entry.target_weights = target;
    entry.realized_shares = outcome.shares;
    entry.trade_cost = outcome.cost;
    entry.portfolio_value = outcome.value;
    entry.traded = outcome.traded;
    entry.fallback_flag = fallback;
    run.values.push_back(outcome.value);
    run.ledger.push_back(std::move(entry));

    recent.push_back(outcome.shares);
    while (recent.size() > static_cast<std::size_t>(std::max(effective.k, 1)))
      recent.pop_front();
  }
  run.values.push_back(detail::seq_dot(recent.back(), prices.prices.row(T).transpose()));
  return run;
}

/**
 * One strategy end to end: allocator decisions plus the accounting loop.
 * A null forecast series selects the daily-rebalanced 1/n benchmark.
 */
inline StrategyRun simulate_strategy(const std::string& name, const PricePanel& prices,
                                     const ForecastSeries* forecasts, int t_s, int t_c,
                                     double rf, double upper, double lambda,
                                     const PostProcessParams& post) {
  if (!forecasts) return run_ledger(name, prices, nullptr, nullptr, t_s, lambda, post, upper);
  const ReturnPanel returns = log_returns(prices);
  const TargetSeries targets = compute_targets(returns, *forecasts, t_s, t_c, rf, upper);
  return run_ledger(name, prices, forecasts, &targets, t_s, lambda, post, upper);
}

namespace detail {

/** Burn-in resolution: explicit t_s wins, otherwise the documented rule. */
inline int resolve_burn_in(const BacktestParams& params, Eigen::Index T) {
  if (params.t_s >= 0) return params.t_s;
  const int frac = static_cast<int>(
      std::ceil(params.burn_fraction * static_cast<double>(T)));
  return std::max({frac, params.t_c, params.t_w});
}

/** Metric table row; entries a series cannot support stay NaN. */
inline StrategyMetrics summarize_run(const StrategyRun& run, const StrategyRun& equal_run,
                                     const ForecastSeries* forecasts,
                                     const ReturnPanel& returns,
                                     const std::vector<Date>& dates, double rf_annual) {
  StrategyMetrics row;
  row.strategy = run.strategy;
  row.lambda = run.lambda;
  try {
    row.annual_return = annualized_return_from_values(run.values);
  } catch (const std::exception&) {
  }
  try {
    row.annual_sharpe = annualized_sharpe_from_values(run.values, rf_annual);
  } catch (const std::exception&) {
  }
  if (forecasts) {
    try {
      row.mean_ic = information_coefficient(*forecasts, returns).mean;
    } catch (const std::exception&) {
    }
  }
  if (&run != &equal_run) {
    try {
      row.monthly_win_fraction = monthly_outperformance(run.values, equal_run.values, dates);
    } catch (const std::exception&) {
    }
  }
  return row;
}

}  // namespace detail

/**
 * The full experiment on one price panel.
 *
 * Prices are first rebased so every asset starts at 1 (this fixes the share
 * units that the cost model reads; returns and weights are unaffected).  The
 * reservoir strategy averages n_s forecast repetitions, where repetition i
 * re-derives every randomized component—input augmentation and projections—
 * from seed master_seed + i.  The ridge benchmark and the trailing-mean
 * momentum benchmark run through the identical allocator, gate and smoothing;
 * the 1/n benchmark rebalances daily, pays costs, and skips both mitigations.
 * Every strategy is run at every cost rate in `lambdas` from one shared
 * target series per strategy; per-repetition value paths are recorded at
 * lambdas.front().  All evaluation is sequential and seed-determined, so
 * repeated calls are bitwise identical.
 */
/**
 * Each asset rescaled to 1.0 at row 0.  Log-returns and weights are scale
 * invariant, so the only effect is that the share-based cost model works in
 * the same units regardless of the input price level.
 */
inline PricePanel rebase_prices(const PricePanel& raw_prices) {
  PricePanel prices = raw_prices;
  for (Eigen::Index j = 0; j < raw_prices.prices.cols(); ++j) {
    const double base = raw_prices.prices(0, j);
    if (!(base > 0.0)) throw data_error("DomainError: nonpositive price at row 0");
    prices.prices.col(j) = raw_prices.prices.col(j) / base;
  }
  return prices;
}

inline BacktestResult run_backtest(const PricePanel& raw_prices, const BacktestParams& params) {
  const Eigen::Index N = raw_prices.prices.rows();
  const Eigen::Index n = raw_prices.prices.cols();
  if (n < 1) throw data_error("ShapeMismatch: price panel has no assets");
  if (N < 3) throw data_error("HistoryTooShort: " + std::to_string(N) + " price rows");
  const Eigen::Index T = N - 1;
  const int t_s = detail::resolve_burn_in(params, T);
  if (t_s < params.t_w)
    throw data_error("HistoryTooShort: burn-in t_s=" + std::to_string(t_s) +
                     " is shorter than the forecast window t_w=" + std::to_string(params.t_w));
  if (t_s + 1 < params.t_c)
    throw data_error("HistoryTooShort: first decision day " + std::to_string(t_s + 1) +
                     " has fewer than t_c=" + std::to_string(params.t_c) +
                     " prior return rows");
  if (T - 1 - t_s < 3)
    throw data_error("HistoryTooShort: burn-in t_s=" + std::to_string(t_s) + " leaves " +
                     std::to_string(std::max<Eigen::Index>(T - 1 - t_s, 0)) +
                     " decision days; need at least 3");
  if (params.lambdas.empty()) throw data_error("DomainError: empty cost-rate grid");
  for (double lambda : params.lambdas)
    if (!(lambda >= 0.0)) throw data_error("DomainError: cost rate lambda must be >= 0");
  if (params.n_s < 1) throw data_error("DomainError: need at least one reservoir repetition");
  if (params.refit_every < 1) throw data_error("DomainError: refit_every must be >= 1");
  if (params.segment_days < 1) throw data_error("DomainError: segment_days must be >= 1");
  detail::check_post(params.post);

  const PricePanel prices = rebase_prices(raw_prices);
  const ReturnPanel returns = log_returns(prices);

  // Shared covariance series: one shrunk estimate per decision day.
  const Eigen::Index days = T - 1 - t_s;
  std::vector<CovEstimate> covs;
  covs.reserve(static_cast<std::size_t>(days));
  for (Eigen::Index t = t_s + 1; t <= T - 1; ++t)
    covs.push_back(estimate_covariance(returns.returns.middleRows(t - params.t_c, params.t_c)));

  // Forecasts: reservoir repetitions, their average, and the benchmarks.
  std::vector<ForecastSeries> repetitions;
  repetitions.reserve(static_cast<std::size_t>(params.n_s));
  for (int i = 0; i < params.n_s; ++i) {
    ReservoirSpec spec = params.reservoir;
    spec.t_w = params.t_w;
    spec.seed = params.master_seed + static_cast<std::uint64_t>(i);
    const InputPath path = augment_inputs(returns, params.augment, spec.seed);
    const Projections proj =
        init_projections(spec, static_cast<int>(path.channels.cols()));
    const FeatureMatrix features = rolling_features(path, proj, spec);
    repetitions.push_back(reservoir_forecast(features, returns, t_s, params.alpha,
                                             params.intercept, params.refit_every));
  }
  const ForecastSeries reservoir_avg = average_forecasts(repetitions);
  const ForecastSeries linreg = linreg_forecast(returns, params.t_w, t_s, params.alpha,
                                                params.intercept, params.refit_every);
  const ForecastSeries momentum = detail::slice_forecasts(
      momentum_forecast(returns, params.t_w), t_s + 1, static_cast<int>(days));

  const TargetSeries targets_res =
      compute_targets(returns, reservoir_avg, t_s, params.t_c, params.rf, params.upper, &covs);
  const TargetSeries targets_lin =
      compute_targets(returns, linreg, t_s, params.t_c, params.rf, params.upper, &covs);
  const TargetSeries targets_mom =
      compute_targets(returns, momentum, t_s, params.t_c, params.rf, params.upper, &covs);

  BacktestResult result;
  result.t_s = t_s;
  result.dates.assign(prices.dates.begin() + (t_s + 1), prices.dates.end());
  result.reservoir_forecasts = reservoir_avg;
  result.reservoir_targets = targets_res;
  const double rf_annual = std::pow(1.0 + params.rf, 252.0) - 1.0;

  for (double lambda : params.lambdas) {
    result.runs.push_back(run_ledger("reservoir", prices, &reservoir_avg, &targets_res, t_s,
                                     lambda, params.post, params.upper));
    result.runs.push_back(run_ledger("linreg", prices, &linreg, &targets_lin, t_s, lambda,
                                     params.post, params.upper));
    result.runs.push_back(run_ledger("momentum", prices, &momentum, &targets_mom, t_s, lambda,
                                     params.post, params.upper));
    result.runs.push_back(run_ledger("one_over_n", prices, nullptr, nullptr, t_s, lambda,
                                     params.post, params.upper));
  }

  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    StrategyRun& run = result.runs[r];
    const StrategyRun& equal_run = result.runs[(r / 4) * 4 + 3];
    const ForecastSeries* forecasts = nullptr;
    switch (r % 4) {
      case 0: forecasts = &reservoir_avg; break;
      case 1: forecasts = &linreg; break;
      case 2: forecasts = &momentum; break;
      default: break;
    }
    result.metrics.push_back(
        detail::summarize_run(run, equal_run, forecasts, returns, result.dates, rf_annual));
    run.segment_normalized = segment_normalize(run.values, params.segment_days);
    if (&run != &equal_run) {
      try {
        run.quarterly_vs_equal = quarterly_return_diffs(run.values, equal_run.values,
                                                        result.dates);
      } catch (const std::exception&) {
      }
    }
  }

  result.per_seed_values.reserve(repetitions.size());
  result.per_seed_ic.reserve(repetitions.size());
  for (const ForecastSeries& rep : repetitions) {
    const TargetSeries targets =
        compute_targets(returns, rep, t_s, params.t_c, params.rf, params.upper, &covs);
    result.per_seed_values.push_back(run_ledger("reservoir_rep", prices, &rep, &targets, t_s,
                                                params.lambdas.front(), params.post,
                                                params.upper)
                                         .values);
    double ic = std::numeric_limits<double>::quiet_NaN();
    try {
      ic = information_coefficient(rep, returns).mean;
    } catch (const std::exception&) {
    }
    result.per_seed_ic.push_back(ic);
  }
  return result;
}

}  // namespace sigfolio
