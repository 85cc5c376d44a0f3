#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sigfolio/commands.hpp"
#include "sigfolio/config.hpp"

#ifdef _WIN32
#else
#include <sys/wait.h>
#endif

using namespace sigfolio;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sigfolio_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/** Small but complete experiment: 4 assets, ~2.8 simulated years. */
std::string small_config(const fs::path& out_dir) {
  return "[data]\n"
         "source = simulate\n"
         "[simulate]\n"
         "n_assets = 4\n"
         "n_steps = 700\n"
         "mu = 0.15\n"
         "sigma = 0.3\n"
         "corr = constant:0.5\n"
         "seed = 7\n"
         "[reservoir]\n"
         "r_d = 12\n"
         "r_v = 0.01\n"
         "[backtest]\n"
         "n_s = 2\n"
         "t_c = 120\n"
         "burn_fraction = 0.2\n"
         "b_u = 0.3\n"
         "lambdas = 0, 0.003\n"
         "master_seed = 7\n"
         "segment_days = 200\n"
         "[grid]\n"
         "r_d = 10, 20\n"
         "r_m = 0\n"
         "r_v = 0.01\n"
         "[heatmap]\n"
         "taus = 0, 0.0001\n"
         "ks = 1, 5\n"
         "[output]\n"
         "dir = " + out_dir.string() + "\n";
}

std::vector<std::string> file_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("default configuration round-trips through its own serialization") {
  const ExperimentConfig def;
  const std::string text = serialize_config(def);
  const ExperimentConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(config_hash(back) == config_hash(def));
}

TEST_CASE("configuration defaults match the bundled study settings") {
  const ExperimentConfig c;
  CHECK(c.n_s == 20);
  CHECK(c.t_w == 22);
  CHECK(c.t_c == 252);
  CHECK(c.burn_fraction == Catch::Approx(0.10));
  CHECK(c.alpha == Catch::Approx(1e-3));
  CHECK(c.b_l == 0.0);
  CHECK(c.b_u == Catch::Approx(0.2));
  CHECK(c.tau == 0.0);
  CHECK(c.k == 1);
  CHECK(c.lambdas == std::vector<double>{0.0});
  CHECK(c.sim.n_assets == 10);
  CHECK(c.sim.n_steps == 5040);
  CHECK(c.reservoir.r_d == 50);
  CHECK(c.reservoir.r_v == Catch::Approx(0.002));
}

TEST_CASE("scalar mu and sigma broadcast to the configured asset count") {
  const ExperimentConfig c = parse_config(
      "[simulate]\nn_assets = 5\nmu = 0.1\nsigma = 0.25\n");
  REQUIRE(c.sim.mu.size() == 5);
  REQUIRE(c.sim.sigma.size() == 5);
  CHECK(c.sim.mu(4) == Catch::Approx(0.1));
  CHECK(c.sim.sigma(0) == Catch::Approx(0.25));
}

TEST_CASE("unknown sections and keys are hard errors") {
  CHECK_THROWS_WITH(parse_config("[nonsense]\nx = 1\n"),
                    Catch::Matchers::ContainsSubstring("UnknownKey"));
  CHECK_THROWS_WITH(parse_config("[backtest]\nt_window = 5\n"),
                    Catch::Matchers::ContainsSubstring("UnknownKey"));
  CHECK_THROWS_WITH(parse_config("n_s = 5\n"),  // key before any section header
                    Catch::Matchers::ContainsSubstring("ParseError"));
}

TEST_CASE("malformed values report the offending line") {
  CHECK_THROWS_WITH(parse_config("[backtest]\nn_s = five\n"),
                    Catch::Matchers::ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(parse_config("[backtest]\nn_s\n"),
                    Catch::Matchers::ContainsSubstring("ParseError"));
}

TEST_CASE("correlation specs build the advertised matrix shapes") {
  CHECK(build_correlation("identity", 4).size() == 0);

  const Eigen::MatrixXd c = build_correlation("constant:0.5", 3);
  CHECK(c(0, 1) == Catch::Approx(0.5));
  CHECK(c(2, 2) == Catch::Approx(1.0));

  const Eigen::MatrixXd p = build_correlation("pairs:0.9", 4);
  CHECK(p(0, 1) == Catch::Approx(0.9));
  CHECK(p(0, 2) == 0.0);
  CHECK(p(2, 3) == Catch::Approx(0.9));

  const fs::path dir = fresh_dir("corr");
  write_text(dir / "corr.csv", "1,0.2\n0.2,1\n");
  const Eigen::MatrixXd f = build_correlation("file:" + (dir / "corr.csv").string(), 2);
  CHECK(f(1, 0) == Catch::Approx(0.2));
  CHECK_THROWS_WITH(build_correlation("file:" + (dir / "corr.csv").string(), 3),
                    Catch::Matchers::ContainsSubstring("ShapeMismatch"));
  CHECK_THROWS_AS(build_correlation("constant:1.5", 3), data_error);
  CHECK_THROWS_AS(build_correlation("wedge:0.5", 3), data_error);
}

TEST_CASE("validation rejects out-of-range settings") {
  auto with = [](const std::string& body) {
    const ExperimentConfig c = parse_config(body);
    validate_config(c);
  };
  CHECK_THROWS_AS(with("[backtest]\nb_l = 0.1\n"), data_error);
  CHECK_THROWS_AS(with("[backtest]\ngate_mode = sometimes\n"), data_error);
  CHECK_THROWS_AS(with("[simulate]\nn_assets = 4\nmu = 0.1\nsigma = 0.3\n"),
                  data_error);  // 4 * default b_u falls short of full budget
  CHECK_THROWS_AS(with("[backtest]\nlambdas = -0.01\n"), data_error);
  CHECK_THROWS_AS(with("[backtest]\nalpha = 0\n"), data_error);
  CHECK_THROWS_AS(with("[data]\nsource = csv\n"), data_error);  // missing csv_path
}

TEST_CASE("simulate and backtest write byte-identical files on rerun") {
  const fs::path dir = fresh_dir("rerun");
  write_text(dir / "exp.cfg", small_config(dir));
  CommandOptions opt;
  opt.config_path = (dir / "exp.cfg").string();

  cmd_simulate(opt);
  const std::string prices1 = read_text(dir / "prices.csv");
  const std::string manifest1 = read_text(dir / "manifest.json");
  cmd_backtest(opt);
  const std::string metrics1 = read_text(dir / "metrics.json");
  const std::string values1 = read_text(dir / "values.csv");
  const std::string ledger1 = read_text(dir / "ledger_lambda_0.003.csv");

  cmd_simulate(opt);
  CHECK(read_text(dir / "prices.csv") == prices1);
  CHECK(read_text(dir / "manifest.json") == manifest1);
  cmd_backtest(opt);
  CHECK(read_text(dir / "metrics.json") == metrics1);
  CHECK(read_text(dir / "values.csv") == values1);
  CHECK(read_text(dir / "ledger_lambda_0.003.csv") == ledger1);
  CHECK(!prices1.empty());
}

TEST_CASE("backtest artifacts follow the advertised schemas") {
  const fs::path dir = fresh_dir("schema");
  write_text(dir / "exp.cfg", small_config(dir));
  CommandOptions opt;
  opt.config_path = (dir / "exp.cfg").string();
  cmd_backtest(opt);

  // One ledger per cost rate, with the fixed column layout.
  REQUIRE(fs::exists(dir / "ledger_lambda_0.csv"));
  REQUIRE(fs::exists(dir / "ledger_lambda_0.003.csv"));
  const std::vector<std::string> ledger = file_lines(dir / "ledger_lambda_0.csv");
  REQUIRE(!ledger.empty());
  CHECK(ledger[0] == "date,strategy,value,cost,w_1,w_2,w_3,w_4");

  const std::vector<std::string> values = file_lines(dir / "values.csv");
  REQUIRE(!values.empty());
  CHECK(values[0] == "date,reservoir,linreg,momentum,one_over_n");

  // Heatmap covers lambdas x taus x ks from the config.
  const std::vector<std::string> heat = file_lines(dir / "heatmap.csv");
  CHECK(heat.size() == 1 + 2 * 2 * 2);
  CHECK(heat[0] == "lambda,tau,k,annual_return,annual_sharpe");

  const std::string manifest = read_text(dir / "manifest.json");
  CHECK(manifest.find("\"config_hash\"") != std::string::npos);
  CHECK(manifest.find("\"command\": \"backtest\"") != std::string::npos);
  CHECK(manifest.find("heatmap.csv") != std::string::npos);

  const std::string metrics = read_text(dir / "metrics.json");
  CHECK(metrics.find("\"annual_sharpe\"") != std::string::npos);
  CHECK(metrics.find("\"per_seed_ic\"") != std::string::npos);
}

TEST_CASE("ledger weights sum to one whenever trades are costless") {
  const fs::path dir = fresh_dir("weights");
  write_text(dir / "exp.cfg", small_config(dir));
  CommandOptions opt;
  opt.config_path = (dir / "exp.cfg").string();
  cmd_backtest(opt);

  const std::vector<std::string> lines = file_lines(dir / "ledger_lambda_0.csv");
  REQUIRE(lines.size() > 10);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> f = split_csv_line(lines[i]);
    REQUIRE(f.size() == 8);
    double sum = 0.0, w = 0.0;
    for (std::size_t j = 4; j < 8; ++j) {
      REQUIRE(parse_number(f[j], w));
      sum += w;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("grid sweeps every cell and keeps going after a failing one") {
  const fs::path dir = fresh_dir("grid");
  write_text(dir / "exp.cfg", small_config(dir));
  CommandOptions opt;
  opt.config_path = (dir / "exp.cfg").string();
  cmd_grid(opt);

  const std::vector<std::string> rows = file_lines(dir / "grid.csv");
  REQUIRE(rows.size() == 1 + 2 * 1 * 1);
  CHECK(rows[0].rfind("r_d,r_m,r_v,", 0) == 0);
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].substr(rows[i].size() - 3) == ",ok");

  // A cell the engine rejects is recorded in-row and the sweep continues.
  const ExperimentConfig cfg = load_config(opt.config_path);
  GridSpec bad;
  bad.r_d = {12, 0};  // zero width cannot initialize projections
  bad.r_m = {0.0};
  bad.r_v = {0.01};
  const PricePanel panel = simulate_market(resolve_sim_config(cfg), cfg.sim_seed);
  BacktestParams base = resolve_backtest_params(cfg);
  base.lambdas = {0.0};
  const std::string table = detail::grid_table(bad, panel, base);
  const std::vector<std::string> bad_rows = [&] {
    std::vector<std::string> out;
    std::string line;
    std::istringstream in(table);
    while (std::getline(in, line)) out.push_back(line);
    return out;
  }();
  REQUIRE(bad_rows.size() == 3);
  CHECK(bad_rows[1].substr(bad_rows[1].size() - 3) == ",ok");
  CHECK(bad_rows[2].find("ShapeMismatch") != std::string::npos);
}

TEST_CASE("report derives tables from stored results and demands their presence") {
  const fs::path empty = fresh_dir("report_empty");
  write_text(empty / "exp.cfg", small_config(empty));
  CommandOptions missing;
  missing.config_path = (empty / "exp.cfg").string();
  CHECK_THROWS_WITH(cmd_report(missing),
                    Catch::Matchers::ContainsSubstring("MissingResults"));

  const fs::path dir = fresh_dir("report");
  write_text(dir / "exp.cfg", small_config(dir));
  CommandOptions opt;
  opt.config_path = (dir / "exp.cfg").string();
  cmd_backtest(opt);
  cmd_report(opt);

  CHECK(fs::exists(dir / "report_segment_comparison.csv"));
  CHECK(fs::exists(dir / "heatmap_lambda_0.csv"));
  CHECK(fs::exists(dir / "heatmap_lambda_0.003.csv"));
  CHECK(fs::exists(dir / "quarterly_diff.csv"));
  const std::vector<std::string> heat = file_lines(dir / "heatmap_lambda_0.csv");
  REQUIRE(heat.size() == 3);  // header + one row per tau
  CHECK(heat[0] == "tau,k_1,k_5");

  // Histogram counts partition the months for every strategy.
  const std::vector<std::string> hist = file_lines(dir / "histogram.csv");
  REQUIRE(hist.size() > 1);
  std::map<std::string, long> per_strategy;
  for (std::size_t i = 1; i < hist.size(); ++i) {
    const std::vector<std::string> f = split_csv_line(hist[i]);
    REQUIRE(f.size() == 4);
    per_strategy[f[0]] += std::atol(f[3].c_str());
  }
  REQUIRE(per_strategy.size() == 4);
  const long months = per_strategy.begin()->second;
  CHECK(months > 12);
  for (const auto& [strategy, count] : per_strategy) CHECK(count == months);

  // Report reruns are byte-identical too.
  const std::string seg1 = read_text(dir / "report_segment_comparison.csv");
  cmd_report(opt);
  CHECK(read_text(dir / "report_segment_comparison.csv") == seg1);
}

TEST_CASE("seed override steers both the simulation and the reservoir draws") {
  const fs::path dir = fresh_dir("seed");
  write_text(dir / "exp.cfg", small_config(dir));
  CommandOptions opt;
  opt.config_path = (dir / "exp.cfg").string();
  opt.seed = 99;
  cmd_simulate(opt);
  const std::string manifest = read_text(dir / "manifest.json");
  CHECK(manifest.find("\"sim_seed\": 99") != std::string::npos);
  CHECK(manifest.find("\"master_seed\": 99") != std::string::npos);
}

#ifdef SIGFOLIO_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SIGFOLIO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
#ifdef _WIN32
  return status;
#else
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#endif
}

}  // namespace

TEST_CASE("executable maps outcomes to the documented exit codes") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("backtest") == 1);            // missing required --config
  CHECK(run_cli("frobnicate --config x") == 1);
  CHECK(run_cli("backtest --config /nonexistent/exp.cfg") == 2);

  const fs::path dir = fresh_dir("exec");
  write_text(dir / "exp.cfg", small_config(dir));
  const std::string cfg = " --config " + (dir / "exp.cfg").string();
  CHECK(run_cli("simulate" + cfg) == 0);
  CHECK(run_cli("backtest" + cfg) == 0);
  CHECK(run_cli("report" + cfg) == 0);
  CHECK(fs::exists(dir / "prices.csv"));
  CHECK(fs::exists(dir / "histogram.csv"));

  // Report without results is a data error at process level as well.
  const fs::path bare = fresh_dir("exec_bare");
  write_text(bare / "exp.cfg", small_config(bare));
  CHECK(run_cli("report --config " + (bare / "exp.cfg").string()) == 2);
}
#endif
