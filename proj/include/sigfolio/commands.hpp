#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sigfolio/backtest.hpp"
#include "sigfolio/config.hpp"
#include "sigfolio/csv.hpp"
#include "sigfolio/dates.hpp"
#include "sigfolio/market_data.hpp"
#include "sigfolio/metrics.hpp"

namespace sigfolio {

/** Parsed command line, shared by all four commands. */
struct CommandOptions {
  std::string config_path;
  std::string out_dir;                // overrides [output] dir when nonempty
  int jobs = 0;                       // 0 = keep the config/engine default
  std::optional<std::uint64_t> seed;  // overrides both sim and master seed
};

namespace detail {

inline ExperimentConfig load_effective_config(const CommandOptions& opt) {
  ExperimentConfig cfg = load_config(opt.config_path);
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (opt.seed) {
    cfg.sim_seed = *opt.seed;
    cfg.master_seed = *opt.seed;
  }
  return cfg;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += ch;
    }
  }
  return out;
}

/** JSON value for a double; non-finite numbers become null. */
inline std::string json_number(double x) {
  if (!std::isfinite(x)) return "null";
  return format_number(x);
}

/** Short label for file names: %g keeps 0.003 readable. */
inline std::string lambda_label(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", lambda);
  return buf;
}

/**
 * The manifest ties every artifact to the exact configuration and seeds
 * that produced it.  No timestamps: reruns must be byte-identical.
 */
inline void write_manifest(const std::string& dir, const std::string& name,
                           const std::string& command, const ExperimentConfig& cfg,
                           const std::vector<std::string>& files) {
  std::string o = "{\n";
  o += "  \"command\": \"" + json_escape(command) + "\",\n";
  o += "  \"config_hash\": \"" + config_hash(cfg) + "\",\n";
  o += "  \"sim_seed\": " + std::to_string(cfg.sim_seed) + ",\n";
  o += "  \"master_seed\": " + std::to_string(cfg.master_seed) + ",\n";
  o += "  \"files\": [";
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (i) o += ",";
    o += "\n    \"" + json_escape(files[i]) + "\"";
  }
  o += files.empty() ? "]\n" : "\n  ]\n";
  o += "}\n";
  write_file_atomic(dir + "/" + name, o);
}

inline PricePanel load_panel(const ExperimentConfig& cfg) {
  if (cfg.source == "csv") return load_prices_csv(cfg.csv_path);
  return simulate_market(resolve_sim_config(cfg), cfg.sim_seed);
}

inline void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw data_error("MissingFile: cannot create directory '" + dir + "'");
}

}  // namespace detail

/** Simulates the configured market and writes prices.csv plus a manifest. */
inline void cmd_simulate(const CommandOptions& opt) {
  const ExperimentConfig cfg = detail::load_effective_config(opt);
  detail::ensure_out_dir(cfg.out_dir);
  const PricePanel panel = detail::load_panel(cfg);
  save_prices_csv(cfg.out_dir + "/prices.csv", panel);
  detail::write_manifest(cfg.out_dir, "manifest.json", "simulate", cfg, {"prices.csv"});
}

namespace detail {

inline std::string metrics_json(const BacktestResult& res, const ExperimentConfig& cfg) {
  std::string o = "{\n";
  o += "  \"config_hash\": \"" + config_hash(cfg) + "\",\n";
  o += "  \"strategies\": [";
  for (std::size_t i = 0; i < res.metrics.size(); ++i) {
    const StrategyMetrics& m = res.metrics[i];
    if (i) o += ",";
    o += "\n    {\"strategy\": \"" + json_escape(m.strategy) + "\", ";
    o += "\"lambda\": " + json_number(m.lambda) + ", ";
    o += "\"annual_return\": " + json_number(m.annual_return) + ", ";
    o += "\"annual_sharpe\": " + json_number(m.annual_sharpe) + ", ";
    o += "\"mean_ic\": " + json_number(m.mean_ic) + ", ";
    o += "\"monthly_win_fraction\": " + json_number(m.monthly_win_fraction) + "}";
  }
  o += res.metrics.empty() ? "],\n" : "\n  ],\n";
  o += "  \"per_seed_ic\": [";
  for (std::size_t i = 0; i < res.per_seed_ic.size(); ++i) {
    if (i) o += ", ";
    o += json_number(res.per_seed_ic[i]);
  }
  o += "]\n}\n";
  return o;
}

/** One ledger file per cost rate: all strategies of that rate, stacked. */
inline std::string ledger_csv(const std::vector<const StrategyRun*>& runs,
                              const PricePanel& rebased) {
  const Eigen::Index n = rebased.prices.cols();
  std::string o = "date,strategy,value,cost";
  for (Eigen::Index j = 0; j < n; ++j) o += ",w_" + std::to_string(j + 1);
  o += "\n";
  for (const StrategyRun* run : runs) {
    for (const LedgerEntry& e : run->ledger) {
      o += format_date(e.date) + "," + run->strategy + "," +
           format_number(e.portfolio_value) + "," + format_number(e.trade_cost);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = e.realized_shares(j) * rebased.prices(e.day, j) / e.portfolio_value;
        o += "," + format_number(w);
      }
      o += "\n";
    }
  }
  return o;
}

/** date + one column per series; all series must match the calendar. */
inline std::string columns_csv(const std::vector<Date>& dates,
                               const std::vector<std::string>& names,
                               const std::vector<const std::vector<double>*>& cols) {
  std::string o = "date";
  for (const std::string& name : names) o += "," + name;
  o += "\n";
  for (std::size_t i = 0; i < dates.size(); ++i) {
    o += format_date(dates[i]);
    for (const std::vector<double>* c : cols) o += "," + format_number((*c)[i]);
    o += "\n";
  }
  return o;
}

}  // namespace detail

/**
 * Full experiment: loads or simulates the panel, runs the backtest and
 * writes metrics.json, per-rate ledgers, value and segment-normalized
 * series, the averaged forecasts, per-seed value paths, and the
 * gate/smoothing grid evaluated at every cost rate (heatmap.csv).
 */
inline void cmd_backtest(const CommandOptions& opt) {
  const ExperimentConfig cfg = detail::load_effective_config(opt);
  detail::ensure_out_dir(cfg.out_dir);
  const PricePanel panel = detail::load_panel(cfg);
  BacktestParams params = resolve_backtest_params(cfg);
  if (opt.jobs > 0) params.jobs = opt.jobs;
  const BacktestResult res = run_backtest(panel, params);
  const PricePanel rebased = rebase_prices(panel);
  std::vector<std::string> files;

  write_file_atomic(cfg.out_dir + "/metrics.json", detail::metrics_json(res, cfg));
  files.push_back("metrics.json");

  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    std::vector<const StrategyRun*> group;
    for (std::size_t s = 0; s < 4; ++s) group.push_back(&res.runs[li * 4 + s]);
    const std::string name = "ledger_lambda_" + detail::lambda_label(cfg.lambdas[li]) + ".csv";
    write_file_atomic(cfg.out_dir + "/" + name, detail::ledger_csv(group, rebased));
    files.push_back(name);
  }

  const std::vector<std::string> strategy_names = {"reservoir", "linreg", "momentum",
                                                   "one_over_n"};
  {
    std::vector<const std::vector<double>*> vals, segs;
    for (std::size_t s = 0; s < 4; ++s) {
      vals.push_back(&res.runs[s].values);
      segs.push_back(&res.runs[s].segment_normalized);
    }
    write_file_atomic(cfg.out_dir + "/values.csv",
                      detail::columns_csv(res.dates, strategy_names, vals));
    files.push_back("values.csv");
    write_file_atomic(cfg.out_dir + "/segment_normalized.csv",
                      detail::columns_csv(res.dates, strategy_names, segs));
    files.push_back("segment_normalized.csv");
  }

  {
    std::string o = "date";
    for (const std::string& t : panel.tickers) o += "," + t;
    o += "\n";
    for (Eigen::Index r = 0; r < res.reservoir_forecasts.predictions.rows(); ++r) {
      o += format_date(res.dates[static_cast<std::size_t>(r)]);
      for (Eigen::Index j = 0; j < res.reservoir_forecasts.predictions.cols(); ++j)
        o += "," + format_number(res.reservoir_forecasts.predictions(r, j));
      o += "\n";
    }
    write_file_atomic(cfg.out_dir + "/forecasts.csv", o);
    files.push_back("forecasts.csv");
  }

  {
    std::vector<std::string> names;
    std::vector<const std::vector<double>*> cols;
    for (std::size_t i = 0; i < res.per_seed_values.size(); ++i) {
      names.push_back("seed_" + std::to_string(cfg.master_seed + i));
      cols.push_back(&res.per_seed_values[i]);
    }
    write_file_atomic(cfg.out_dir + "/per_seed_values.csv",
                      detail::columns_csv(res.dates, names, cols));
    files.push_back("per_seed_values.csv");
  }

  {
    // Gate/smoothing grid: the targets and forecasts are fixed, so each cell
    // is one cheap ledger replay of the reservoir strategy.
    const double rf_annual = std::pow(1.0 + cfg.rf, 252.0) - 1.0;
    std::string o = "lambda,tau,k,annual_return,annual_sharpe\n";
    for (double lambda : cfg.lambdas) {
      for (double tau : cfg.heatmap.taus) {
        for (int k : cfg.heatmap.ks) {
          PostProcessParams post = params.post;
          post.tau = tau;
          post.k = k;
          const StrategyRun run =
              run_ledger("reservoir", rebased, &res.reservoir_forecasts,
                         &res.reservoir_targets, res.t_s, lambda, post, cfg.b_u);
          o += format_number(lambda) + "," + format_number(tau) + "," +
               std::to_string(k) + "," +
               format_number(annualized_return_from_values(run.values)) + "," +
               format_number(annualized_sharpe_from_values(run.values, rf_annual)) + "\n";
        }
      }
    }
    write_file_atomic(cfg.out_dir + "/heatmap.csv", o);
    files.push_back("heatmap.csv");
  }

  detail::write_manifest(cfg.out_dir, "manifest.json", "backtest", cfg, files);
}

namespace detail {

/**
 * Hyperparameter sweep over (r_d, r_m, r_v).  Every cell is a full backtest
 * with the same data and seeds; rows report the reservoir strategy's annual
 * return/Sharpe and its lead over each benchmark at the first cost rate.
 * Cell failures land in the status column and the sweep continues.
 */
inline std::string grid_table(const GridSpec& grid, const PricePanel& panel,
                              const BacktestParams& base) {
  std::string o =
      "r_d,r_m,r_v,ra_reservoir_pct,sa_reservoir,"
      "d_ra_vs_momentum_pct,d_sa_vs_momentum,"
      "d_ra_vs_one_over_n_pct,d_sa_vs_one_over_n,"
      "d_ra_vs_linreg_pct,d_sa_vs_linreg,status\n";
  for (int r_d : grid.r_d) {
    for (double r_m : grid.r_m) {
      for (double r_v : grid.r_v) {
        o += std::to_string(r_d) + "," + format_number(r_m) + "," + format_number(r_v);
        BacktestParams params = base;
        params.reservoir.r_d = r_d;
        params.reservoir.r_m = r_m;
        params.reservoir.r_v = r_v;
        try {
          const BacktestResult res = run_backtest(panel, params);
          const StrategyMetrics& rsv = res.metrics[0];  // reservoir, linreg,
          const StrategyMetrics& lin = res.metrics[1];  // momentum, one_over_n
          const StrategyMetrics& mom = res.metrics[2];
          const StrategyMetrics& eq = res.metrics[3];
          o += "," + format_number(rsv.annual_return * 100.0);
          o += "," + format_number(rsv.annual_sharpe);
          o += "," + format_number((rsv.annual_return - mom.annual_return) * 100.0);
          o += "," + format_number(rsv.annual_sharpe - mom.annual_sharpe);
          o += "," + format_number((rsv.annual_return - eq.annual_return) * 100.0);
          o += "," + format_number(rsv.annual_sharpe - eq.annual_sharpe);
          o += "," + format_number((rsv.annual_return - lin.annual_return) * 100.0);
          o += "," + format_number(rsv.annual_sharpe - lin.annual_sharpe);
          o += ",ok\n";
        } catch (const std::exception& e) {
          std::string msg = e.what();
          for (char& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
          o += ",,,,,,,," + msg + "\n";
        }
      }
    }
  }
  return o;
}

}  // namespace detail

/** Runs the (r_d, r_m, r_v) sweep from the config and writes grid.csv. */
inline void cmd_grid(const CommandOptions& opt) {
  const ExperimentConfig cfg = detail::load_effective_config(opt);
  detail::ensure_out_dir(cfg.out_dir);
  const PricePanel panel = detail::load_panel(cfg);
  BacktestParams base = resolve_backtest_params(cfg);
  if (opt.jobs > 0) base.jobs = opt.jobs;
  base.lambdas = {cfg.lambdas.front()};
  write_file_atomic(cfg.out_dir + "/grid.csv", detail::grid_table(cfg.grid, panel, base));
  detail::write_manifest(cfg.out_dir, "grid_manifest.json", "grid", cfg, {"grid.csv"});
}

namespace detail {

struct ValueTable {
  std::vector<Date> dates;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // one vector per name
};

inline ValueTable read_value_table(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw data_error("MissingResults: '" + path + "' is empty");
  ValueTable t;
  const std::vector<std::string> header = split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "date")
    throw data_error("MissingResults: '" + path + "' lacks a date,series... header");
  t.names.assign(header.begin() + 1, header.end());
  t.columns.resize(t.names.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::vector<std::string> f = split_csv_line(lines[i]);
    if (f.size() != header.size())
      throw data_error("MissingResults: ragged row in '" + path + "'");
    const auto d = parse_date(f[0]);
    if (!d) throw data_error("MissingResults: bad date '" + f[0] + "' in '" + path + "'");
    t.dates.push_back(*d);
    for (std::size_t j = 0; j < t.names.size(); ++j) {
      double v = 0.0;
      if (!parse_number(f[j + 1], v))
        throw data_error("MissingResults: non-numeric value in '" + path + "'");
      t.columns[j].push_back(v);
    }
  }
  if (t.dates.empty()) throw data_error("MissingResults: '" + path + "' has no rows");
  return t;
}

}  // namespace detail

/**
 * Turns stored backtest results into plot-ready files: segment-normalized
 * comparison, one gate/smoothing Sharpe matrix per cost rate, monthly-return
 * histogram bins, and quarterly return differences against 1/n.
 */
inline void cmd_report(const CommandOptions& opt) {
  const ExperimentConfig cfg = detail::load_effective_config(opt);
  const std::string dir = cfg.out_dir;
  if (!std::filesystem::exists(dir + "/values.csv") ||
      !std::filesystem::exists(dir + "/heatmap.csv"))
    throw data_error("MissingResults: expected values.csv and heatmap.csv under '" + dir +
                     "'; run the backtest command first");
  const detail::ValueTable values = detail::read_value_table(dir + "/values.csv");
  std::vector<std::string> files;

  {
    std::vector<const std::vector<double>*> segs;
    std::vector<std::vector<double>> storage;
    storage.reserve(values.columns.size());
    for (const std::vector<double>& col : values.columns)
      storage.push_back(segment_normalize(col, cfg.segment_days));
    for (const std::vector<double>& col : storage) segs.push_back(&col);
    write_file_atomic(dir + "/report_segment_comparison.csv",
                      detail::columns_csv(values.dates, values.names, segs));
    files.push_back("report_segment_comparison.csv");
  }

  {
    // Pivot heatmap.csv into one tau x k Sharpe matrix per cost rate.
    const std::vector<std::string> lines = read_lines(dir + "/heatmap.csv");
    std::vector<double> lams, taus;
    std::vector<int> ks;
    struct Cell { double lambda, tau, sharpe; int k; };
    std::vector<Cell> cells;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      const std::vector<std::string> f = split_csv_line(lines[i]);
      if (f.size() != 5) throw data_error("MissingResults: ragged row in heatmap.csv");
      Cell c{};
      double kval = 0.0;
      if (!parse_number(f[0], c.lambda) || !parse_number(f[1], c.tau) ||
          !parse_number(f[2], kval) || !parse_number(f[4], c.sharpe))
        throw data_error("MissingResults: non-numeric row in heatmap.csv");
      c.k = static_cast<int>(kval);
      cells.push_back(c);
      if (std::find(lams.begin(), lams.end(), c.lambda) == lams.end())
        lams.push_back(c.lambda);
      if (std::find(taus.begin(), taus.end(), c.tau) == taus.end()) taus.push_back(c.tau);
      if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
    }
    if (cells.empty()) throw data_error("MissingResults: heatmap.csv has no rows");
    for (double lambda : lams) {
      std::string o = "tau";
      for (int k : ks) o += ",k_" + std::to_string(k);
      o += "\n";
      for (double tau : taus) {
        o += format_number(tau);
        for (int k : ks) {
          for (const Cell& c : cells)
            if (c.lambda == lambda && c.tau == tau && c.k == k) {
              o += "," + format_number(c.sharpe);
              break;
            }
        }
        o += "\n";
      }
      const std::string name = "heatmap_lambda_" + detail::lambda_label(lambda) + ".csv";
      write_file_atomic(dir + "/" + name, o);
      files.push_back(name);
    }
  }

  {
    std::string o = "strategy,bin_left,bin_right,count\n";
    for (std::size_t j = 0; j < values.names.size(); ++j) {
      const std::vector<double> months = monthly_returns(values.columns[j], values.dates);
      const Histogram h = histogram_counts(months, 13);
      for (std::size_t b = 0; b < h.counts.size(); ++b)
        o += values.names[j] + "," + format_number(h.edges[b]) + "," +
             format_number(h.edges[b + 1]) + "," + std::to_string(h.counts[b]) + "\n";
    }
    write_file_atomic(dir + "/histogram.csv", o);
    files.push_back("histogram.csv");
  }

  {
    // Quarterly return difference of each forecast strategy against 1/n.
    std::size_t eq_col = values.names.size();
    for (std::size_t j = 0; j < values.names.size(); ++j)
      if (values.names[j] == "one_over_n") eq_col = j;
    if (eq_col == values.names.size())
      throw data_error("MissingResults: values.csv lacks a one_over_n column");
    std::string header = "quarter";
    std::vector<std::vector<QuarterDiff>> diffs;
    for (std::size_t j = 0; j < values.names.size(); ++j) {
      if (j == eq_col) continue;
      header += "," + values.names[j];
      diffs.push_back(quarterly_return_diffs(values.columns[j], values.columns[eq_col],
                                             values.dates));
    }
    std::string o = header + "\n";
    if (!diffs.empty()) {
      for (std::size_t q = 0; q < diffs[0].size(); ++q) {
        o += diffs[0][q].label;
        for (const std::vector<QuarterDiff>& d : diffs) o += "," + format_number(d[q].diff);
        o += "\n";
      }
    }
    write_file_atomic(dir + "/quarterly_diff.csv", o);
    files.push_back("quarterly_diff.csv");
  }

  detail::write_manifest(dir, "report_manifest.json", "report", cfg, files);
}

}  // namespace sigfolio
