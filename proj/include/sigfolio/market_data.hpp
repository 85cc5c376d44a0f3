#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "sigfolio/csv.hpp"
#include "sigfolio/dates.hpp"
#include "sigfolio/errors.hpp"
#include "sigfolio/rng.hpp"

namespace sigfolio {

/** Daily close panel: rows = days (strictly increasing dates), cols = assets. */
struct PricePanel {
  std::vector<Date> dates;           // size = prices.rows()
  std::vector<std::string> tickers;  // size = prices.cols()
  Eigen::MatrixXd prices;            // all entries > 0
};

/**
 * Daily log-return panel, one row shorter than its price panel.
 * Row k holds log S[k+1] - log S[k] and carries the date of day k+1
 * (the day on which that return is observed).
 */
struct ReturnPanel {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  Eigen::MatrixXd returns;
};

/**
 * Correlated geometric diffusion with a common price-sum drift modulation:
 *
 *   S[t+1, i] = S[t, i] * (1 + mu_i * cos(cos_scale * sum_j S[t, j]) * dt
 *                            + noise_scale * sigma_i * sqrt(dt) * eps[t, i])
 *
 * where eps rows are N(0, corr) via the Cholesky factor of corr.  The drift
 * of every asset flips sign with the cosine of the price sum, so the panel
 * carries a weak, nonlinearly encoded predictable component.
 */
struct SimConfig {
  int n_assets = 10;
  int n_steps = 5040;   // number of daily increments; panel gets n_steps + 1 rows
  double s0 = 100.0;
  double dt = 1.0 / 252.0;
  // Sensitivity of the drift modulation to the price sum.  With ten assets
  // started at 100, cos_scale = 0.003 puts roughly one modulation half-cycle
  // across the simulated horizon, so the sign regime persists for months and
  // a window-based forecaster has something to latch onto.
  double cos_scale = 0.003;
  double noise_scale = 1.0;   // multiplies sigma in the diffusion term only
  Eigen::VectorXd mu;         // default: the ten-asset study vector below
  Eigen::VectorXd sigma;      // default: flat 0.30 annualized
  Eigen::MatrixXd corr;       // empty => identity
  Date start_date{2000, 1, 3};

  SimConfig() {
    mu.resize(10);
    mu << -0.1, 0.2, -0.25, 0.25, -0.35, 0.22, -0.45, 0.25, -0.6, 0.28;
    // Equal volatilities keep every cross-asset return spread equally
    // informative about the drift signal and remove the variance-drag
    // differential that would otherwise let any risk-aware allocator beat
    // 1/n without forecasting anything.
    sigma = Eigen::VectorXd::Constant(10, 0.30);
  }
};

/** Equicorrelation matrix: ones on the diagonal, rho elsewhere. */
inline Eigen::MatrixXd equicorrelation(int n, double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(n, n, rho);
  c.diagonal().setOnes();
  return c;
}

/**
 * Block-diagonal pair correlation: assets (0,1), (2,3), ... form 2x2 blocks
 * with off-diagonal rho; a trailing unpaired asset stays independent.  With
 * |rho| < 1 the matrix is positive definite.
 */
inline Eigen::MatrixXd pair_correlation(int n, double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; i += 2) {
    c(i, i + 1) = rho;
    c(i + 1, i) = rho;
  }
  return c;
}

namespace detail {

inline void validate_sim_config(const SimConfig& cfg) {
  if (cfg.n_assets < 1) throw data_error("ShapeMismatch: n_assets must be >= 1");
  if (cfg.n_steps < 1) throw data_error("ShapeMismatch: n_steps must be >= 1");
  if (!(cfg.s0 > 0.0)) throw data_error("ShapeMismatch: s0 must be > 0");
  if (!(cfg.dt > 0.0)) throw data_error("ShapeMismatch: dt must be > 0");
  if (cfg.mu.size() != cfg.n_assets || cfg.sigma.size() != cfg.n_assets)
    throw data_error("ShapeMismatch: mu/sigma length " + std::to_string(cfg.mu.size()) + "/" +
                     std::to_string(cfg.sigma.size()) + " does not match n_assets " +
                     std::to_string(cfg.n_assets));
  if (cfg.corr.size() != 0 &&
      (cfg.corr.rows() != cfg.n_assets || cfg.corr.cols() != cfg.n_assets))
    throw data_error("ShapeMismatch: corr must be n_assets x n_assets");
}

}  // namespace detail

/**
 * Simulates the panel from a seed.  Deterministic: one block of n_assets
 * normals is drawn per step in asset order from the market-shock stream of
 * `seed`.  Prices are floored at 1e-8 * s0 so the panel stays positive.
 * When `shocks_out` is non-null it receives the correlated normal shocks
 * (n_steps x n_assets), which is what tests audit against `corr`.
 */
inline PricePanel simulate_market(const SimConfig& cfg, std::uint64_t seed,
                                  Eigen::MatrixXd* shocks_out = nullptr) {
  detail::validate_sim_config(cfg);
  const int n = cfg.n_assets;

  Eigen::MatrixXd chol;  // empty when corr is identity
  if (cfg.corr.size() != 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(cfg.corr);
    if (llt.info() != Eigen::Success)
      throw numeric_error("CorrNotPSD: correlation matrix has no Cholesky factor");
    chol = llt.matrixL();
  }

  RandomStream stream(seed, kStreamMarketShocks);
  const double floor_px = 1e-8 * cfg.s0;
  const double sqdt = std::sqrt(cfg.dt);

  PricePanel panel;
  panel.prices.resize(cfg.n_steps + 1, n);
  panel.prices.row(0).setConstant(cfg.s0);
  if (shocks_out) shocks_out->resize(cfg.n_steps, n);

  Eigen::VectorXd z(n);
  Eigen::VectorXd eps(n);
  for (int t = 0; t < cfg.n_steps; ++t) {
    for (int i = 0; i < n; ++i) z(i) = stream.gaussian();
    eps = chol.size() != 0 ? (chol * z).eval() : z;
    if (shocks_out) shocks_out->row(t) = eps;
    const double drift_mod = std::cos(cfg.cos_scale * panel.prices.row(t).sum());
    for (int i = 0; i < n; ++i) {
      const double growth =
          1.0 + cfg.mu(i) * drift_mod * cfg.dt + cfg.noise_scale * cfg.sigma(i) * sqdt * eps(i);
      panel.prices(t + 1, i) = std::max(panel.prices(t, i) * growth, floor_px);
    }
  }

  panel.dates = trading_calendar(cfg.start_date, cfg.n_steps + 1);
  panel.tickers.reserve(n);
  for (int i = 0; i < n; ++i) panel.tickers.push_back("A" + std::to_string(i + 1));
  return panel;
}

/**
 * Instantaneous drift of each asset implied by the simulation dynamics:
 * row t, asset i = S[t, i] * mu_i * cos(cos_scale * sum_j S[t, j]).
 * Useful as the unobservable ground truth when studying forecast quality.
 */
inline Eigen::MatrixXd true_drift(const PricePanel& panel, const SimConfig& cfg) {
  if (panel.prices.cols() != cfg.n_assets)
    throw data_error("ShapeMismatch: panel has " + std::to_string(panel.prices.cols()) +
                     " assets, config expects " + std::to_string(cfg.n_assets));
  detail::validate_sim_config(cfg);
  Eigen::MatrixXd drift(panel.prices.rows(), panel.prices.cols());
  for (Eigen::Index t = 0; t < panel.prices.rows(); ++t) {
    const double mod = std::cos(cfg.cos_scale * panel.prices.row(t).sum());
    for (Eigen::Index i = 0; i < panel.prices.cols(); ++i)
      drift(t, i) = panel.prices(t, i) * cfg.mu(i) * mod;
  }
  return drift;
}

/** Divides each column by its first value; the first row becomes all ones. */
inline PricePanel normalize_prices(const PricePanel& panel) {
  if (panel.prices.rows() < 1) throw data_error("TooShort: empty price panel");
  PricePanel out = panel;
  for (Eigen::Index j = 0; j < out.prices.cols(); ++j) {
    const double base = panel.prices(0, j);
    if (!(base > 0.0))
      throw data_error("NonPositivePrice: row 0, column " + std::to_string(j));
    out.prices.col(j) /= base;
  }
  return out;
}

/** Log returns; requires at least two rows. */
inline ReturnPanel log_returns(const PricePanel& panel) {
  if (panel.prices.rows() < 2)
    throw data_error("TooShort: need at least 2 price rows for returns");
  ReturnPanel out;
  out.tickers = panel.tickers;
  out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  // Element-by-element std::log so every entry is computed identically no
  // matter the panel's shape (vectorized logs treat loop tails differently).
  Eigen::MatrixXd logp(panel.prices.rows(), panel.prices.cols());
  for (Eigen::Index j = 0; j < logp.cols(); ++j)
    for (Eigen::Index i = 0; i < logp.rows(); ++i) logp(i, j) = std::log(panel.prices(i, j));
  out.returns = logp.bottomRows(logp.rows() - 1) - logp.topRows(logp.rows() - 1);
  return out;
}

/**
 * Loads a panel from CSV with header "date,<ticker>,...".  Rows may arrive
 * shuffled (they are sorted by date); duplicate dates, non-positive or
 * unparseable prices, and ragged rows are hard errors that carry the
 * offending 1-based line number.
 */
inline PricePanel load_prices_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw data_error("MalformedRow: line 1: empty file in '" + path + "'");

  const std::vector<std::string> header = split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "date")
    throw data_error("MalformedRow: line 1: header must be 'date,<ticker>,...'");
  const std::size_t n = header.size() - 1;

  struct Row {
    Date date;
    std::vector<double> px;
    std::size_t line_no;
  };
  std::vector<Row> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(lines[li]);
    const std::string line_tag = "line " + std::to_string(li + 1);
    if (fields.size() != n + 1)
      throw data_error("MalformedRow: " + line_tag + ": expected " + std::to_string(n + 1) +
                       " fields, got " + std::to_string(fields.size()));
    const auto d = parse_date(fields[0]);
    if (!d) throw data_error("MalformedRow: " + line_tag + ": bad date '" + fields[0] + "'");
    Row row{*d, {}, li + 1};
    row.px.reserve(n);
    for (std::size_t j = 1; j <= n; ++j) {
      double v = 0.0;
      if (!parse_number(fields[j], v))
        throw data_error("MalformedRow: " + line_tag + ": bad number '" + fields[j] + "'");
      if (!(v > 0.0))
        throw data_error("NonPositivePrice: row " + std::to_string(rows.size() + 1) +
                         ", column " + std::to_string(j) + " (" + line_tag + ")");
      row.px.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 1) throw data_error("TooShort: no data rows in '" + path + "'");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].date == rows[i - 1].date)
      throw data_error("DuplicateDate: " + format_date(rows[i].date) + " (line " +
                       std::to_string(rows[i].line_no) + ")");

  PricePanel panel;
  panel.tickers.assign(header.begin() + 1, header.end());
  panel.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  panel.dates.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    panel.dates.push_back(rows[i].date);
    for (std::size_t j = 0; j < n; ++j)
      panel.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].px[j];
  }
  return panel;
}

inline std::string prices_to_csv(const PricePanel& panel) {
  std::string out = "date";
  for (const auto& t : panel.tickers) out += "," + t;
  out += "\n";
  for (Eigen::Index i = 0; i < panel.prices.rows(); ++i) {
    out += format_date(panel.dates[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < panel.prices.cols(); ++j)
      out += "," + format_number(panel.prices(i, j));
    out += "\n";
  }
  return out;
}

inline void save_prices_csv(const std::string& path, const PricePanel& panel) {
  write_file_atomic(path, prices_to_csv(panel));
}

/**
 * Extra input channels layered on top of the raw asset returns.  The
 * assembled channel order is fixed:
 *   [time] [asset returns] [random portfolios] [mean-return vol] [per-asset vols]
 */
struct AugmentSpec {
  bool include_time = true;        // constant-dt increment channel in column 0
  int random_portfolios = 0;       // synthetic series with frozen random simplex weights
  int mean_return_vol_window = 0;  // 0 = off; rolling std of the cross-asset mean return
  int per_asset_vol_window = 0;    // 0 = off; rolling std per asset
  bool normalize_by_first = false; // divide each window's return channels by their first value
  double time_step = 1.0 / 252.0;  // the increment written into the time channel
};

/**
 * Reservoir input path.  Rows are per-day increments (the asset channels are
 * log returns, the time channel is the constant dt); feature windows are
 * taken over consecutive rows.  `asset_offset`/`n_assets` delimit the return
 * channels so window renormalization knows which columns it applies to.
 */
struct InputPath {
  Eigen::MatrixXd channels;        // rows = return rows, cols = total channels
  std::vector<std::string> names;  // one per channel
  int asset_offset = 0;
  int n_assets = 0;
  bool renormalize_windows = false;
  double dt = 1.0 / 252.0;
};

namespace detail {

/**
 * Trailing sample standard deviation (divisor window-1) over each length-
 * `window` span; rows before the first complete window are back-filled with
 * the first defined value.
 */
inline Eigen::VectorXd rolling_std(const Eigen::VectorXd& x, int window) {
  if (window < 2) throw data_error("WindowTooLong: rolling window must be >= 2");
  if (x.size() < window)
    throw data_error("WindowTooLong: window " + std::to_string(window) + " exceeds " +
                     std::to_string(x.size()) + " rows");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index t = window - 1; t < x.size(); ++t) {
    const auto seg = x.segment(t - window + 1, window);
    const double mean = seg.mean();
    const double ss = (seg.array() - mean).square().sum();
    out(t) = std::sqrt(ss / (window - 1));
  }
  out.head(window - 1).setConstant(out(window - 1));
  return out;
}

}  // namespace detail

/**
 * Assembles the reservoir input path from a return panel.  Random-portfolio
 * weights are drawn once from the augmentation stream of `seed` (per
 * portfolio: n exponentials, normalized to the simplex) and frozen; they are
 * convex combinations of the asset return columns.
 */
inline InputPath augment_inputs(const ReturnPanel& returns, const AugmentSpec& spec,
                                std::uint64_t seed) {
  const Eigen::Index rows = returns.returns.rows();
  const Eigen::Index n = returns.returns.cols();
  if (rows < 1) throw data_error("TooShort: empty return panel");
  if (spec.random_portfolios < 0)
    throw data_error("ShapeMismatch: random_portfolios must be >= 0");

  const int cols = (spec.include_time ? 1 : 0) + static_cast<int>(n) + spec.random_portfolios +
                   (spec.mean_return_vol_window > 0 ? 1 : 0) +
                   (spec.per_asset_vol_window > 0 ? static_cast<int>(n) : 0);

  InputPath path;
  path.channels.resize(rows, cols);
  path.n_assets = static_cast<int>(n);
  path.asset_offset = spec.include_time ? 1 : 0;
  path.renormalize_windows = spec.normalize_by_first;
  path.dt = spec.time_step;

  int c = 0;
  if (spec.include_time) {
    path.channels.col(c).setConstant(spec.time_step);
    path.names.push_back("t");
    ++c;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    path.channels.col(c) = returns.returns.col(j);
    path.names.push_back(returns.tickers.empty() ? "r" + std::to_string(j + 1)
                                                 : returns.tickers[static_cast<std::size_t>(j)]);
    ++c;
  }
  if (spec.random_portfolios > 0) {
    RandomStream stream(seed, kStreamAugmentation);
    for (int p = 0; p < spec.random_portfolios; ++p) {
      Eigen::VectorXd w(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        double u = stream.uniform();
        w(j) = -std::log(1.0 - u);  // standard exponential => uniform simplex
      }
      w /= w.sum();
      path.channels.col(c) = returns.returns * w;
      path.names.push_back("rp" + std::to_string(p + 1));
      ++c;
    }
  }
  if (spec.mean_return_vol_window > 0) {
    const Eigen::VectorXd mean_ret = returns.returns.rowwise().mean();
    path.channels.col(c) = detail::rolling_std(mean_ret, spec.mean_return_vol_window);
    path.names.push_back("mean_ret_vol");
    ++c;
  }
  if (spec.per_asset_vol_window > 0) {
    for (Eigen::Index j = 0; j < n; ++j) {
      path.channels.col(c) =
          detail::rolling_std(returns.returns.col(j), spec.per_asset_vol_window);
      path.names.push_back("vol_" + (returns.tickers.empty()
                                         ? "r" + std::to_string(j + 1)
                                         : returns.tickers[static_cast<std::size_t>(j)]));
      ++c;
    }
  }
  return path;
}

}  // namespace sigfolio
