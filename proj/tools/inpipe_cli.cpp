// Command-line front end: simulate, fig3, mc, plot.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "inpipe/errors.hpp"
#include "inpipe/scenario.hpp"
#include "inpipe/simulation.hpp"
#include "inpipe/trace_io.hpp"

namespace fs = std::filesystem;
using namespace inpipe;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDiverged = 3;

void write_json(const nlohmann::json& doc, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-pipe robot navigation simulator"};
  app.require_subcommand(1);

  fs::path scenario_path, trace_path, summary_path, out_dir, out_path;
  std::optional<std::uint64_t> seed;
  std::size_t trials = 50;
  std::uint64_t seed_base = 1;
  unsigned threads = 0;

  auto* sim = app.add_subcommand("simulate", "run one closed-loop scenario");
  sim->add_option("--scenario", scenario_path)->required()->check(CLI::ExistingFile);
  sim->add_option("--out-trace", trace_path)->required();
  sim->add_option("--out-summary", summary_path)->required();
  sim->add_option("--seed", seed, "override the scenario seed");

  auto* fig3 = app.add_subcommand("fig3", "straight-pipe stabilisation run with plots");
  fig3->add_option("--scenario", scenario_path)->required()->check(CLI::ExistingFile);
  fig3->add_option("--out-dir", out_dir)->required();

  auto* mc = app.add_subcommand("mc", "Monte-Carlo batch over consecutive seeds");
  mc->add_option("--scenario", scenario_path)->required()->check(CLI::ExistingFile);
  mc->add_option("--trials", trials)->required()->check(CLI::PositiveNumber);
  mc->add_option("--seed-base", seed_base)->required();
  mc->add_option("--out", out_path)->required();
  mc->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  auto* plot = app.add_subcommand("plot", "render SVG plots from a trace CSV");
  plot->add_option("--trace", trace_path)->required()->check(CLI::ExistingFile);
  plot->add_option("--out-dir", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sim) {
      Scenario sc = load_scenario(scenario_path);
      if (seed) sc.seed = *seed;
      const RunResult run = run_scenario(sc);
      if (trace_path.has_parent_path()) fs::create_directories(trace_path.parent_path());
      write_trace(run.trace, trace_path);
      write_json(to_json(run.summary), summary_path);
    } else if (*fig3) {
      const Scenario sc = load_scenario(scenario_path);
      const RunResult run = replicate_fig3(sc);
      fs::create_directories(out_dir);
      write_trace(run.trace, out_dir / "trace.csv");
      write_json(to_json(run.summary), out_dir / "summary.json");
      emit_plots(run.trace, out_dir);
      std::cout << "settled_s " << run.summary.settled_s << "\nv_ss_mps "
                << run.summary.v_ss_mps << '\n';
    } else if (*mc) {
      const Scenario sc = load_scenario(scenario_path);
      const MonteCarloResult res = monte_carlo(sc, trials, seed_base, std::nullopt, threads);
      write_json(to_json(res), out_path);
      std::cout << "trials " << res.trials << " failures " << res.failures.size()
                << " pf_success_fraction " << res.pf_success_fraction << '\n';
    } else if (*plot) {
      for (const auto& f : emit_plots(read_trace(trace_path), out_dir))
        std::cout << f.string() << '\n';
    }
  } catch (const SimulationDiverged& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const SchemaError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InvariantError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const GeometryError& e) {
    std::cerr << "invalid geometry: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
