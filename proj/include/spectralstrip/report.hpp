#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectralstrip/lattice.hpp"
#include "spectralstrip/spectral.hpp"
#include "spectralstrip/stripping.hpp"

namespace spectralstrip {

enum class Command { spectrum, shoot, transform, strip, verify, sweep };
enum class Profile { fast, fine };
enum class PlotKind { spectrum, braid, sweep, trace };

Command parse_command(const std::string& name);
std::string to_string(Command c);
Profile parse_profile(const std::string& name);
std::string to_string(Profile p);
PlotKind parse_plot_kind(const std::string& name);
std::string to_string(PlotKind k);

struct PotentialSpec {
  enum class Kind { well, random, file };
  Kind kind = Kind::well;
  double depth = 1.0;  // well depth, or strength for random potentials
  double a = 1.0;
  int dim = 1;
  std::uint64_t seed = 0;
  RandomStructure structure = RandomStructure::full;
  std::string path;
};

// "depth=1 a=1 dim=1", "depth=1,a=1,dim=1" or positional "1,1,1".
PotentialSpec parse_well_spec(const std::vector<std::string>& tokens);
// Keys seed, dim, a, strength (positional in that order) and optional
// structure=full|diagonal.
PotentialSpec parse_random_spec(const std::vector<std::string>& tokens);
// "x_min,x_max,n"
Grid parse_grid_spec(const std::string& text);
std::vector<double> parse_number_list(const std::string& text);

struct ExperimentConfig {
  Command command = Command::verify;
  PotentialSpec potential;
  std::optional<Grid> grid;  // overrides the profile
  Profile profile = Profile::fast;
  double cluster_tol = 0.0;  // <= 0: module default
  double degeneracy_tol = 0.0;  // <= 0: module default
  double cutoff_threshold = 1e-10;
  int max_steps = 0;
  std::vector<double> depths;  // sweep amplitudes
  std::string metric = "lt_ratio";
  std::string out_path;  // JSON report
  std::string csv_path;  // plot data
  std::optional<PlotKind> plot;  // defaults per command
  int threads = 0;  // sweep workers; <= 0: SPECTRALSTRIP_THREADS or hardware

  void validate() const;  // throws UsageError
};

// Keys mirror the long flags: command, well, random, potential_file, grid,
// profile, cluster_tol, deg_tol, cutoff, max_steps, depths, metric, out, csv,
// plot. Values given to `base` are overwritten only by keys present in j.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json config_to_json(const ExperimentConfig& c);

Grid profile_grid(Profile p);
Grid resolve_grid(const ExperimentConfig& c);
MatrixPotential build_potential(const PotentialSpec& spec, const Grid& grid);

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;  // pass means value <= bound unless stated in detail
  std::string detail;
};

struct SweepRow {
  double depth = 0.0;
  double value = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  int bound_states = 0;
};

struct RunResult {
  int status = 0;  // 0 all verdicts pass, 1 failure, 2 usage error
  nlohmann::json report;
  std::vector<Verdict> verdicts;
  // Plot data, filled according to the command.
  std::optional<Spectrum> spectrum;
  std::optional<Grid> braid_grid;
  std::optional<MatrixSeries> braid;  // F samples
  std::vector<SweepRow> sweep;
  std::optional<StrippingTrace> trace;
  std::string metric;
};

// Executes the command and fills the report. Library errors are caught:
// UsageError and ParameterError give status 2, every other error status 1;
// the diagnostic is stored under "error" in the report.
RunResult run(const ExperimentConfig& config);

// Versioned CSV for the requested plot kind. Throws UsageError when the
// result carries no data of that kind.
std::string emit_plot_data(const RunResult& result, PlotKind kind);
PlotKind default_plot_kind(Command c);

// run() followed by writing the report and plot files named in the config.
RunResult run_and_write(const ExperimentConfig& config);

int sweep_threads(int requested);

}  // namespace spectralstrip
