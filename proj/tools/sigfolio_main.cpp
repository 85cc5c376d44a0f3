#include <cstdio>
#include <exception>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "sigfolio/commands.hpp"
#include "sigfolio/errors.hpp"

namespace {

/** Attaches the shared --config/--out/--jobs/--seed options to a subcommand. */
void add_common_options(CLI::App* sub, sigfolio::CommandOptions& opt) {
  sub->add_option("--config", opt.config_path, "experiment configuration file")->required();
  sub->add_option("--out", opt.out_dir, "output directory (overrides the config)");
  sub->add_option("--jobs", opt.jobs, "worker threads for the reservoir repetitions")
      ->check(CLI::PositiveNumber);
  std::uint64_t seed = 0;
  sub->add_option_function<std::uint64_t>(
      "--seed", [&opt](std::uint64_t s) { opt.seed = s; },
      "override both the simulation and the reservoir master seed");
  (void)seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sigfolio: randomized-signature portfolio research engine"};
  app.require_subcommand(1);

  sigfolio::CommandOptions opt;
  std::function<void(const sigfolio::CommandOptions&)> action;

  CLI::App* simulate = app.add_subcommand("simulate", "generate a price panel");
  add_common_options(simulate, opt);
  simulate->callback([&] { action = sigfolio::cmd_simulate; });

  CLI::App* backtest = app.add_subcommand("backtest", "run the full strategy comparison");
  add_common_options(backtest, opt);
  backtest->callback([&] { action = sigfolio::cmd_backtest; });

  CLI::App* grid = app.add_subcommand("grid", "sweep reservoir hyperparameters");
  add_common_options(grid, opt);
  grid->callback([&] { action = sigfolio::cmd_grid; });

  CLI::App* report = app.add_subcommand("report", "derive plot-ready tables from results");
  add_common_options(report, opt);
  report->callback([&] { action = sigfolio::cmd_report; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }

  try {
    action(opt);
  } catch (const sigfolio::data_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const sigfolio::numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
