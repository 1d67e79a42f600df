// spectralstrip: command-line front end for the library.
//
//   spectralstrip verify --well depth=1 a=1 dim=1
//   spectralstrip strip --random seed=7 dim=2 a=1 strength=3 --out trace.json --csv trace.csv
//   spectralstrip sweep --well a=1 dim=1 --depths 1,10,100 --metric lt_ratio --csv sweep.csv

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spectralstrip/report.hpp"

using namespace spectralstrip;

namespace {

nlohmann::json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
}

void print_summary(const RunResult& r) {
  for (const Verdict& v : r.verdicts)
    std::printf("%s %s value=%.10g bound=%.10g\n", v.pass ? "PASS" : "FAIL", v.name.c_str(), v.value, v.bound);
  if (r.report.contains("error"))
    std::printf("error: %s\n", r.report["error"]["message"].get<std::string>().c_str());
  std::printf("status %d\n", r.status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Darboux stripping and Lieb-Thirring checks for matrix Schroedinger operators"};
  app.set_help_all_flag("--help-all");

  std::string command;
  std::vector<std::string> well, random;
  std::string potential_file, grid, profile, config_path, out, csv, plot, depths, metric;
  double cluster_tol = 0.0, deg_tol = 0.0, cutoff = 0.0;
  int max_steps = 0, threads = 0;

  auto* o_command =
      app.add_option("command", command, "spectrum | shoot | transform | strip | verify | sweep (may come from --config)");
  auto* o_well = app.add_option("--well", well, "square well: depth=D a=A dim=N (or D,A,N)")->expected(1, 3);
  auto* o_random =
      app.add_option("--random", random, "random potential: seed=S dim=N a=A strength=G [structure=diagonal]")
          ->expected(1, 5);
  auto* o_file = app.add_option("--potential-file", potential_file, "potential JSON file");
  o_well->excludes(o_random)->excludes(o_file);
  o_random->excludes(o_file);
  auto* o_grid = app.add_option("--grid", grid, "x_min,x_max,n (overrides the profile)");
  auto* o_profile = app.add_option("--profile", profile, "fast (h=4e-3 on [-12,12]) or fine (h=5e-4 on [-15,15])");
  auto* o_cluster = app.add_option("--cluster-tol", cluster_tol, "eigenvalue clustering gap");
  auto* o_deg = app.add_option("--deg-tol", deg_tol, "degeneracy tolerance for F(x0) eigenvalues");
  auto* o_cutoff = app.add_option("--cutoff", cutoff, "stripping cutoff threshold (default 1e-10)");
  auto* o_steps = app.add_option("--max-steps", max_steps, "stripping step limit (default 64 N)");
  auto* o_depths = app.add_option("--depths", depths, "sweep amplitudes, comma separated");
  auto* o_metric = app.add_option("--metric", metric, "sweep metric: lt_ratio or deficit");
  auto* o_out = app.add_option("--out", out, "JSON report path (stdout when omitted)");
  auto* o_csv = app.add_option("--csv", csv, "plot data CSV path");
  auto* o_plot = app.add_option("--plot", plot, "CSV kind: spectrum, braid, sweep or trace");
  auto* o_threads = app.add_option("--threads", threads, "sweep workers (default SPECTRALSTRIP_THREADS)");
  app.add_option("--config", config_path, "JSON config; flags override it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  ExperimentConfig cfg;
  try {
    nlohmann::json file_cfg = nlohmann::json::object();
    if (!config_path.empty()) file_cfg = load_config(config_path);
    cfg = config_from_json(file_cfg);
    if (o_command->count())
      cfg.command = parse_command(command);
    else if (!file_cfg.contains("command"))
      throw UsageError("no command given");
    if (o_well->count()) cfg.potential = parse_well_spec(well);
    if (o_random->count()) cfg.potential = parse_random_spec(random);
    if (o_file->count()) {
      cfg.potential = PotentialSpec{};
      cfg.potential.kind = PotentialSpec::Kind::file;
      cfg.potential.path = potential_file;
    }
    if (o_grid->count()) cfg.grid = parse_grid_spec(grid);
    if (o_profile->count()) cfg.profile = parse_profile(profile);
    if (o_cluster->count()) {
      if (!(cluster_tol > 0.0)) throw UsageError("--cluster-tol must be positive");
      cfg.cluster_tol = cluster_tol;
    }
    if (o_deg->count()) {
      if (!(deg_tol > 0.0)) throw UsageError("--deg-tol must be positive");
      cfg.degeneracy_tol = deg_tol;
    }
    if (o_cutoff->count()) cfg.cutoff_threshold = cutoff;
    if (o_steps->count()) cfg.max_steps = max_steps;
    if (o_depths->count()) cfg.depths = parse_number_list(depths);
    if (o_metric->count()) cfg.metric = metric;
    if (o_out->count()) cfg.out_path = out;
    if (o_csv->count()) cfg.csv_path = csv;
    if (o_plot->count()) cfg.plot = parse_plot_kind(plot);
    if (o_threads->count()) {
      if (threads < 1) throw UsageError("--threads must be at least 1");
      cfg.threads = threads;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  }

  try {
    const RunResult r = run_and_write(cfg);
    if (cfg.out_path.empty())
      std::cout << r.report.dump(2) << '\n';
    else
      print_summary(r);
    if (r.report.contains("error"))
      std::fprintf(stderr, "%s\n", r.report["error"]["message"].get<std::string>().c_str());
    return r.status;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
