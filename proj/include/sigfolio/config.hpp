#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "sigfolio/backtest.hpp"
#include "sigfolio/csv.hpp"
#include "sigfolio/dates.hpp"
#include "sigfolio/errors.hpp"
#include "sigfolio/market_data.hpp"
#include "sigfolio/reservoir.hpp"

namespace sigfolio {

/** Hyperparameter sweep axes for the grid command. */
struct GridSpec {
  std::vector<int> r_d = {50, 60, 70, 100};
  std::vector<double> r_m = {0.0, 0.05, 0.1};
  std::vector<double> r_v = {0.01, 0.03, 0.05, 0.3, 1.0};
};

/**
 * Gate-threshold x smoothing-depth grid evaluated per cost rate.  The tau
 * defaults bracket the median and 90th percentile of the day-over-day
 * forecast move observed in the bundled simulated study, so the gate goes
 * from never binding to binding on most days.
 */
struct HeatmapSpec {
  std::vector<double> taus = {0.0, 1e-3, 2.5e-3};
  std::vector<int> ks = {1, 5, 22};
};

/**
 * Everything a run needs, parsed from a flat sectioned key=value file.
 * The defaults reproduce the bundled simulated-market study: run
 * `sigfolio backtest` against a default config and the reported numbers
 * are the ones discussed in the README.
 *
 * The correlation matrix is kept as its textual form (`corr_spec`) so
 * that serialization round-trips exactly; resolve_sim_config() builds
 * the matrix on demand.
 */
struct ExperimentConfig {
  // [data]
  std::string source = "simulate";  // "simulate" | "csv"
  std::string csv_path;             // consulted only when source == "csv"

  // [simulate]
  SimConfig sim;                    // corr member stays empty at this layer
  std::string corr_spec = "constant:0.85";
  std::uint64_t sim_seed = 20;

  // [reservoir]
  ReservoirSpec reservoir;          // t_w and seed are engine-managed

  // [augment]
  AugmentSpec augment;

  // [backtest]
  int n_s = 20;
  int t_w = 22;
  int t_c = 252;
  double burn_fraction = 0.10;
  double alpha = 1e-3;
  bool intercept = false;
  double rf = 0.0;                  // per-day rate
  double b_l = 0.0;                 // lower weight bound; only 0 is supported
  double b_u = 0.2;                 // per-asset weight cap
  std::vector<double> lambdas = {0.0};
  double tau = 0.0;
  int k = 1;
  std::string gate_mode = "prose_above";  // "prose_above" | "eq_below"
  std::uint64_t master_seed = 20;
  int refit_every = 1;
  int segment_days = 504;

  // [grid]
  GridSpec grid;

  // [heatmap]
  HeatmapSpec heatmap;

  // [output]
  std::string out_dir = "out";
};

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_number(v[i]);
  }
  return out;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(v[i]);
  }
  return out;
}

inline std::string join_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_number(v(i));
  }
  return out;
}

inline std::string bool_word(bool b) { return b ? "true" : "false"; }

[[noreturn]] inline void config_fail(int line_no, const std::string& what) {
  throw data_error("ParseError: line " + std::to_string(line_no) + ": " + what);
}

inline double to_double(const std::string& s, int line_no) {
  double v = 0.0;
  if (!parse_number(s, v)) config_fail(line_no, "expected a number, got '" + s + "'");
  return v;
}

inline int to_int(const std::string& s, int line_no) {
  const double v = to_double(s, line_no);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    config_fail(line_no, "expected an integer, got '" + s + "'");
  return i;
}

inline std::uint64_t to_u64(const std::string& s, int line_no) {
  if (s.empty()) config_fail(line_no, "expected an unsigned integer, got ''");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size() || s[0] == '-')
    config_fail(line_no, "expected an unsigned integer, got '" + s + "'");
  return v;
}

inline bool to_bool(const std::string& s, int line_no) {
  if (s == "true") return true;
  if (s == "false") return false;
  config_fail(line_no, "expected true or false, got '" + s + "'");
}

inline std::vector<double> to_double_list(const std::string& s, int line_no) {
  std::vector<double> out;
  for (const std::string& f : split_csv_line(s)) out.push_back(to_double(f, line_no));
  if (out.empty()) config_fail(line_no, "expected a comma-separated list");
  return out;
}

inline std::vector<int> to_int_list(const std::string& s, int line_no) {
  std::vector<int> out;
  for (const std::string& f : split_csv_line(s)) out.push_back(to_int(f, line_no));
  if (out.empty()) config_fail(line_no, "expected a comma-separated list");
  return out;
}

inline Eigen::VectorXd to_vector(const std::string& s, int line_no) {
  const std::vector<double> v = to_double_list(s, line_no);
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace detail

inline std::string activation_name(ReservoirSpec::Activation a) {
  switch (a) {
    case ReservoirSpec::Activation::Tanh: return "tanh";
    case ReservoirSpec::Activation::Identity: return "identity";
    case ReservoirSpec::Activation::Relu: return "relu";
  }
  return "tanh";
}

inline ReservoirSpec::Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return ReservoirSpec::Activation::Tanh;
  if (s == "identity") return ReservoirSpec::Activation::Identity;
  if (s == "relu") return ReservoirSpec::Activation::Relu;
  throw data_error("DomainError: unknown activation '" + s +
                   "' (expected tanh, identity or relu)");
}

/**
 * Canonical text form: fixed section and key order, 17-significant-digit
 * numbers.  parse_config(serialize_config(c)) reproduces c exactly, and the
 * config hash is defined over these bytes.
 */
inline std::string serialize_config(const ExperimentConfig& c) {
  std::string o;
  o += "[data]\n";
  o += "source = " + c.source + "\n";
  o += "csv_path = " + c.csv_path + "\n";
  o += "\n[simulate]\n";
  o += "n_assets = " + std::to_string(c.sim.n_assets) + "\n";
  o += "n_steps = " + std::to_string(c.sim.n_steps) + "\n";
  o += "s0 = " + format_number(c.sim.s0) + "\n";
  o += "dt = " + format_number(c.sim.dt) + "\n";
  o += "cos_scale = " + format_number(c.sim.cos_scale) + "\n";
  o += "noise_scale = " + format_number(c.sim.noise_scale) + "\n";
  o += "mu = " + detail::join_vector(c.sim.mu) + "\n";
  o += "sigma = " + detail::join_vector(c.sim.sigma) + "\n";
  o += "corr = " + c.corr_spec + "\n";
  o += "seed = " + std::to_string(c.sim_seed) + "\n";
  o += "start_date = " + format_date(c.sim.start_date) + "\n";
  o += "\n[reservoir]\n";
  o += "r_d = " + std::to_string(c.reservoir.r_d) + "\n";
  o += "r_m = " + format_number(c.reservoir.r_m) + "\n";
  o += "r_v = " + format_number(c.reservoir.r_v) + "\n";
  o += "activation = " + activation_name(c.reservoir.activation) + "\n";
  o += "\n[augment]\n";
  o += "include_time = " + detail::bool_word(c.augment.include_time) + "\n";
  o += "random_portfolios = " + std::to_string(c.augment.random_portfolios) + "\n";
  o += "mean_return_vol_window = " + std::to_string(c.augment.mean_return_vol_window) + "\n";
  o += "per_asset_vol_window = " + std::to_string(c.augment.per_asset_vol_window) + "\n";
  o += "normalize_by_first = " + detail::bool_word(c.augment.normalize_by_first) + "\n";
  o += "time_step = " + format_number(c.augment.time_step) + "\n";
  o += "\n[backtest]\n";
  o += "n_s = " + std::to_string(c.n_s) + "\n";
  o += "t_w = " + std::to_string(c.t_w) + "\n";
  o += "t_c = " + std::to_string(c.t_c) + "\n";
  o += "burn_fraction = " + format_number(c.burn_fraction) + "\n";
  o += "alpha = " + format_number(c.alpha) + "\n";
  o += "intercept = " + detail::bool_word(c.intercept) + "\n";
  o += "rf = " + format_number(c.rf) + "\n";
  o += "b_l = " + format_number(c.b_l) + "\n";
  o += "b_u = " + format_number(c.b_u) + "\n";
  o += "lambdas = " + detail::join_doubles(c.lambdas) + "\n";
  o += "tau = " + format_number(c.tau) + "\n";
  o += "k = " + std::to_string(c.k) + "\n";
  o += "gate_mode = " + c.gate_mode + "\n";
  o += "master_seed = " + std::to_string(c.master_seed) + "\n";
  o += "refit_every = " + std::to_string(c.refit_every) + "\n";
  o += "segment_days = " + std::to_string(c.segment_days) + "\n";
  o += "\n[grid]\n";
  o += "r_d = " + detail::join_ints(c.grid.r_d) + "\n";
  o += "r_m = " + detail::join_doubles(c.grid.r_m) + "\n";
  o += "r_v = " + detail::join_doubles(c.grid.r_v) + "\n";
  o += "\n[heatmap]\n";
  o += "taus = " + detail::join_doubles(c.heatmap.taus) + "\n";
  o += "ks = " + detail::join_ints(c.heatmap.ks) + "\n";
  o += "\n[output]\n";
  o += "dir = " + c.out_dir + "\n";
  return o;
}

/** Range and consistency checks shared by every command. */
inline void validate_config(const ExperimentConfig& c) {
  if (c.source != "simulate" && c.source != "csv")
    throw data_error("DomainError: data source must be 'simulate' or 'csv', got '" +
                     c.source + "'");
  if (c.source == "csv" && c.csv_path.empty())
    throw data_error("DomainError: source = csv requires csv_path");
  if (c.sim.n_assets < 1) throw data_error("DomainError: n_assets must be >= 1");
  if (c.sim.n_steps < 1) throw data_error("DomainError: n_steps must be >= 1");
  if (!(c.sim.s0 > 0.0)) throw data_error("DomainError: s0 must be > 0");
  if (!(c.sim.dt > 0.0)) throw data_error("DomainError: dt must be > 0");
  if (!(c.sim.noise_scale > 0.0)) throw data_error("DomainError: noise_scale must be > 0");
  if (c.sim.mu.size() != c.sim.n_assets)
    throw data_error("ShapeMismatch: mu has " + std::to_string(c.sim.mu.size()) +
                     " entries for " + std::to_string(c.sim.n_assets) + " assets");
  if (c.sim.sigma.size() != c.sim.n_assets)
    throw data_error("ShapeMismatch: sigma has " + std::to_string(c.sim.sigma.size()) +
                     " entries for " + std::to_string(c.sim.n_assets) + " assets");
  if ((c.sim.sigma.array() < 0.0).any())
    throw data_error("DomainError: sigma entries must be >= 0");
  if (c.reservoir.r_d < 1) throw data_error("DomainError: r_d must be >= 1");
  if (!(c.reservoir.r_v > 0.0)) throw data_error("DomainError: r_v must be > 0");
  if (c.augment.random_portfolios < 0)
    throw data_error("DomainError: random_portfolios must be >= 0");
  if (c.augment.mean_return_vol_window < 0 || c.augment.per_asset_vol_window < 0)
    throw data_error("DomainError: volatility windows must be >= 0");
  if (!(c.augment.time_step > 0.0)) throw data_error("DomainError: time_step must be > 0");
  if (c.n_s < 1) throw data_error("DomainError: n_s must be >= 1");
  if (c.t_w < 2) throw data_error("DomainError: t_w must be >= 2");
  if (c.t_c < 2) throw data_error("DomainError: t_c must be >= 2");
  if (!(c.burn_fraction >= 0.0 && c.burn_fraction < 1.0))
    throw data_error("DomainError: burn_fraction must lie in [0, 1)");
  if (!(c.alpha > 0.0)) throw data_error("DomainError: alpha must be > 0");
  if (c.b_l != 0.0)
    throw data_error("DomainError: only b_l = 0 (long-only floor) is supported");
  if (!(c.b_u > 0.0)) throw data_error("DomainError: b_u must be > 0");
  if (static_cast<double>(c.sim.n_assets) * c.b_u < 1.0 && c.source == "simulate")
    throw data_error("DomainError: n_assets * b_u < 1 leaves the budget infeasible");
  if (c.lambdas.empty()) throw data_error("DomainError: lambdas must be nonempty");
  for (double l : c.lambdas)
    if (!(l >= 0.0)) throw data_error("DomainError: cost rates must be >= 0");
  if (!(c.tau >= 0.0)) throw data_error("DomainError: tau must be >= 0");
  if (c.k < 1) throw data_error("DomainError: k must be >= 1");
  if (c.gate_mode != "prose_above" && c.gate_mode != "eq_below")
    throw data_error("DomainError: gate_mode must be 'prose_above' or 'eq_below', got '" +
                     c.gate_mode + "'");
  if (c.refit_every < 1) throw data_error("DomainError: refit_every must be >= 1");
  if (c.segment_days < 1) throw data_error("DomainError: segment_days must be >= 1");
  if (c.grid.r_d.empty() || c.grid.r_m.empty() || c.grid.r_v.empty())
    throw data_error("DomainError: grid axes must be nonempty");
  for (int d : c.grid.r_d)
    if (d < 1) throw data_error("DomainError: grid r_d entries must be >= 1");
  for (double v : c.grid.r_v)
    if (!(v > 0.0)) throw data_error("DomainError: grid r_v entries must be > 0");
  if (c.heatmap.taus.empty() || c.heatmap.ks.empty())
    throw data_error("DomainError: heatmap axes must be nonempty");
  for (double t : c.heatmap.taus)
    if (!(t >= 0.0)) throw data_error("DomainError: heatmap taus must be >= 0");
  for (int kk : c.heatmap.ks)
    if (kk < 1) throw data_error("DomainError: heatmap ks must be >= 1");
  if (c.out_dir.empty()) throw data_error("DomainError: output dir must be nonempty");
  activation_from_name(activation_name(c.reservoir.activation));
}

/**
 * Parses the sectioned key=value format.  '#' starts a comment, blank lines
 * are skipped, and every key must belong to its section: unknown keys or
 * sections are hard errors so hyperparameter typos cannot pass silently.
 * A single-entry mu/sigma value broadcasts to n_assets after all lines are
 * read, so key order never matters.
 */
inline ExperimentConfig parse_config(const std::vector<std::string>& lines) {
  ExperimentConfig c;
  std::string section;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int no = static_cast<int>(i) + 1;
    std::string line = lines[i];
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') detail::config_fail(no, "unterminated section header");
      section = line.substr(1, line.size() - 2);
      if (section != "data" && section != "simulate" && section != "reservoir" &&
          section != "augment" && section != "backtest" && section != "grid" &&
          section != "heatmap" && section != "output")
        throw data_error("UnknownKey: line " + std::to_string(no) + ": section [" +
                         section + "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) detail::config_fail(no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty()) detail::config_fail(no, "key before any [section]");

    if (section == "data") {
      if (key == "source") c.source = val;
      else if (key == "csv_path") c.csv_path = val;
      else throw data_error("UnknownKey: [data] " + key);
    } else if (section == "simulate") {
      if (key == "n_assets") c.sim.n_assets = detail::to_int(val, no);
      else if (key == "n_steps") c.sim.n_steps = detail::to_int(val, no);
      else if (key == "s0") c.sim.s0 = detail::to_double(val, no);
      else if (key == "dt") c.sim.dt = detail::to_double(val, no);
      else if (key == "cos_scale") c.sim.cos_scale = detail::to_double(val, no);
      else if (key == "noise_scale") c.sim.noise_scale = detail::to_double(val, no);
      else if (key == "mu") c.sim.mu = detail::to_vector(val, no);
      else if (key == "sigma") c.sim.sigma = detail::to_vector(val, no);
      else if (key == "corr") c.corr_spec = val;
      else if (key == "seed") c.sim_seed = detail::to_u64(val, no);
      else if (key == "start_date") {
        const auto d = parse_date(val);
        if (!d) detail::config_fail(no, "expected YYYY-MM-DD, got '" + val + "'");
        c.sim.start_date = *d;
      } else throw data_error("UnknownKey: [simulate] " + key);
    } else if (section == "reservoir") {
      if (key == "r_d") c.reservoir.r_d = detail::to_int(val, no);
      else if (key == "r_m") c.reservoir.r_m = detail::to_double(val, no);
      else if (key == "r_v") c.reservoir.r_v = detail::to_double(val, no);
      else if (key == "activation") c.reservoir.activation = activation_from_name(val);
      else throw data_error("UnknownKey: [reservoir] " + key);
    } else if (section == "augment") {
      if (key == "include_time") c.augment.include_time = detail::to_bool(val, no);
      else if (key == "random_portfolios")
        c.augment.random_portfolios = detail::to_int(val, no);
      else if (key == "mean_return_vol_window")
        c.augment.mean_return_vol_window = detail::to_int(val, no);
      else if (key == "per_asset_vol_window")
        c.augment.per_asset_vol_window = detail::to_int(val, no);
      else if (key == "normalize_by_first")
        c.augment.normalize_by_first = detail::to_bool(val, no);
      else if (key == "time_step") c.augment.time_step = detail::to_double(val, no);
      else throw data_error("UnknownKey: [augment] " + key);
    } else if (section == "backtest") {
      if (key == "n_s") c.n_s = detail::to_int(val, no);
      else if (key == "t_w") c.t_w = detail::to_int(val, no);
      else if (key == "t_c") c.t_c = detail::to_int(val, no);
      else if (key == "burn_fraction") c.burn_fraction = detail::to_double(val, no);
      else if (key == "alpha") c.alpha = detail::to_double(val, no);
      else if (key == "intercept") c.intercept = detail::to_bool(val, no);
      else if (key == "rf") c.rf = detail::to_double(val, no);
      else if (key == "b_l") c.b_l = detail::to_double(val, no);
      else if (key == "b_u") c.b_u = detail::to_double(val, no);
      else if (key == "lambdas") c.lambdas = detail::to_double_list(val, no);
      else if (key == "tau") c.tau = detail::to_double(val, no);
      else if (key == "k") c.k = detail::to_int(val, no);
      else if (key == "gate_mode") c.gate_mode = val;
      else if (key == "master_seed") c.master_seed = detail::to_u64(val, no);
      else if (key == "refit_every") c.refit_every = detail::to_int(val, no);
      else if (key == "segment_days") c.segment_days = detail::to_int(val, no);
      else throw data_error("UnknownKey: [backtest] " + key);
    } else if (section == "grid") {
      if (key == "r_d") c.grid.r_d = detail::to_int_list(val, no);
      else if (key == "r_m") c.grid.r_m = detail::to_double_list(val, no);
      else if (key == "r_v") c.grid.r_v = detail::to_double_list(val, no);
      else throw data_error("UnknownKey: [grid] " + key);
    } else if (section == "heatmap") {
      if (key == "taus") c.heatmap.taus = detail::to_double_list(val, no);
      else if (key == "ks") c.heatmap.ks = detail::to_int_list(val, no);
      else throw data_error("UnknownKey: [heatmap] " + key);
    } else {  // output
      if (key == "dir") c.out_dir = val;
      else throw data_error("UnknownKey: [output] " + key);
    }
  }
  // Broadcast scalar mu/sigma once the asset count is known.
  if (c.sim.mu.size() == 1 && c.sim.n_assets > 1)
    c.sim.mu = Eigen::VectorXd::Constant(c.sim.n_assets, c.sim.mu(0));
  if (c.sim.sigma.size() == 1 && c.sim.n_assets > 1)
    c.sim.sigma = Eigen::VectorXd::Constant(c.sim.n_assets, c.sim.sigma(0));
  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) lines.push_back(line);
  return parse_config(lines);
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_lines(path));
}

/**
 * Builds the correlation matrix from its textual form:
 *   identity          uncorrelated shocks (empty matrix, the simulator's default)
 *   constant:<rho>    equicorrelation at rho
 *   pairs:<rho>       2x2 blocks (0,1), (2,3), ... at rho
 *   file:<path>       plain numeric CSV, n rows x n columns, no header
 */
inline Eigen::MatrixXd build_correlation(const std::string& spec, int n_assets) {
  if (spec == "identity") return Eigen::MatrixXd();
  const std::size_t colon = spec.find(':');
  if (colon == std::string::npos)
    throw data_error("DomainError: corr must be identity, constant:<rho>, pairs:<rho> "
                     "or file:<path>, got '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string arg = trim(spec.substr(colon + 1));
  if (kind == "constant" || kind == "pairs") {
    double rho = 0.0;
    if (!parse_number(arg, rho))
      throw data_error("DomainError: corr '" + spec + "' needs a numeric rho");
    // Positive-definiteness bounds: equicorrelation needs rho in
    // (-1/(n-1), 1), pair blocks need |rho| < 1.
    const double lower =
        kind == "constant" && n_assets > 1 ? -1.0 / (n_assets - 1) : -1.0;
    if (!(rho > lower && rho < 1.0))
      throw data_error("DomainError: corr '" + spec + "' is not positive definite for " +
                       std::to_string(n_assets) + " assets");
    return kind == "constant" ? equicorrelation(n_assets, rho)
                              : pair_correlation(n_assets, rho);
  }
  if (kind == "file") {
    const std::vector<std::string> lines = read_lines(arg);
    std::vector<std::vector<double>> rows;
    for (const std::string& line : lines) {
      if (trim(line).empty()) continue;
      std::vector<double> row;
      for (const std::string& f : split_csv_line(line)) {
        double v = 0.0;
        if (!parse_number(f, v))
          throw data_error("ParseError: non-numeric entry '" + f + "' in " + arg);
        row.push_back(v);
      }
      rows.push_back(std::move(row));
    }
    if (rows.size() != static_cast<std::size_t>(n_assets))
      throw data_error("ShapeMismatch: corr file has " + std::to_string(rows.size()) +
                       " rows for " + std::to_string(n_assets) + " assets");
    Eigen::MatrixXd m(n_assets, n_assets);
    for (int i = 0; i < n_assets; ++i) {
      if (rows[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(n_assets))
        throw data_error("ShapeMismatch: corr file row " + std::to_string(i + 1) +
                         " has " + std::to_string(rows[static_cast<std::size_t>(i)].size()) +
                         " columns");
      for (int j = 0; j < n_assets; ++j)
        m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
  }
  throw data_error("DomainError: unknown corr kind '" + kind + "'");
}

/** SimConfig with the correlation matrix materialized. */
inline SimConfig resolve_sim_config(const ExperimentConfig& c) {
  SimConfig sim = c.sim;
  sim.corr = build_correlation(c.corr_spec, sim.n_assets);
  return sim;
}

/** Engine parameters assembled from the config. */
inline BacktestParams resolve_backtest_params(const ExperimentConfig& c) {
  BacktestParams p;
  p.t_w = c.t_w;
  p.t_c = c.t_c;
  p.burn_fraction = c.burn_fraction;
  p.alpha = c.alpha;
  p.intercept = c.intercept;
  p.n_s = c.n_s;
  p.master_seed = c.master_seed;
  p.reservoir = c.reservoir;
  p.augment = c.augment;
  p.rf = c.rf;
  p.upper = c.b_u;
  p.lambdas = c.lambdas;
  p.post.tau = c.tau;
  p.post.k = c.k;
  p.post.mode = c.gate_mode == "eq_below" ? GateMode::eq_below : GateMode::prose_above;
  p.refit_every = c.refit_every;
  p.segment_days = c.segment_days;
  return p;
}

/** FNV-1a 64-bit over the canonical serialization, as a fixed-width hex tag. */
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string bytes = serialize_config(c);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sigfolio
