#include "spectralstrip/report.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "spectralstrip/darboux.hpp"

namespace spectralstrip {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("cannot parse " + what + " '" + s + "' as a number");
  }
  if (used != s.size() || !std::isfinite(v)) throw UsageError("cannot parse " + what + " '" + s + "' as a number");
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw UsageError("cannot parse " + what + " '" + s + "' as an integer");
  }
  if (used != s.size()) throw UsageError("cannot parse " + what + " '" + s + "' as an integer");
  return v;
}

std::vector<std::string> split_items(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const std::string& t : tokens) {
    std::string cur;
    for (char ch : t) {
      if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// key=value items, or bare values matched to `order` positionally.
std::map<std::string, std::string> keyed_items(const std::vector<std::string>& tokens,
                                               const std::vector<std::string>& order,
                                               const std::string& what) {
  const auto items = split_items(tokens);
  std::map<std::string, std::string> out;
  if (items.empty()) return out;
  const bool named = items.front().find('=') != std::string::npos;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto eq = items[i].find('=');
    if ((eq != std::string::npos) != named)
      throw UsageError(what + ": mix of key=value and positional values");
    std::string key, value;
    if (named) {
      key = items[i].substr(0, eq);
      value = items[i].substr(eq + 1);
      if (std::find(order.begin(), order.end(), key) == order.end() && key != "structure")
        throw UsageError(what + ": unknown key '" + key + "'");
    } else {
      if (i >= order.size()) throw UsageError(what + ": too many values");
      key = order[i];
      value = items[i];
    }
    if (value.empty()) throw UsageError(what + ": empty value for '" + key + "'");
    if (!out.emplace(key, value).second) throw UsageError(what + ": duplicate key '" + key + "'");
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json grid_json(const Grid& g) {
  return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"n", g.n_points}, {"h", g.h}};
}

json spectrum_json(const Spectrum& s) {
  json m = json::array();
  for (const Multiplet& x : s.multiplets)
    m.push_back({{"lambda", x.lambda}, {"multiplicity", x.multiplicity}, {"marginal", x.marginal}});
  return {{"marginal_floor", s.marginal_floor}, {"count", s.total_count()}, {"multiplets", m}};
}

json potential_summary(const MatrixPotential& v) {
  return {{"dim", v.dim},
          {"support_half_width", v.support_half_width()},
          {"grid", grid_json(v.grid)},
          {"int_tr_v", potential_moment(v, 1)},
          {"int_tr_v2", potential_moment(v, 2)}};
}

json rvec_json(const RVec& r) {
  json a = json::array();
  for (int i = 0; i < r.size(); ++i) a.push_back(r(i));
  return a;
}

json step_json(const StripStep& s) {
  return {{"lambda", s.lambda},
          {"K", s.K},
          {"moment_before", s.moment_before},
          {"moment_after", s.moment_after},
          {"identity_residual", s.identity_residual},
          {"identity_ok", s.identity_ok},
          {"cutoff_radius", s.cutoff_radius},
          {"effective_threshold", s.effective_threshold},
          {"tail_mass", s.tail_mass},
          {"shift_bound", s.shift_bound},
          {"e", s.e},
          {"telescoped", s.telescoped}};
}

void add(RunResult& r, std::string name, bool pass, double value, double bound, std::string detail = {}) {
  r.verdicts.push_back({std::move(name), pass, value, bound, std::move(detail)});
}

SpectrumOptions spectrum_options(const ExperimentConfig& c) {
  SpectrumOptions o;
  o.cluster_tol = c.cluster_tol;
  return o;
}

ShootOptions shoot_options(const ExperimentConfig& c) {
  ShootOptions o;
  o.degeneracy_tol = c.degeneracy_tol;
  return o;
}

std::vector<double> expanded(const Spectrum& s) {
  std::vector<double> out;
  for (const Multiplet& m : s.multiplets)
    for (int k = 0; k < m.multiplicity; ++k) out.push_back(m.lambda);
  return out;
}

int max_resolved_multiplicity(const Spectrum& s) {
  int worst = 0;
  for (const Multiplet& m : s.multiplets)
    if (!m.marginal) worst = std::max(worst, m.multiplicity);
  return worst;
}

void run_spectrum(const ExperimentConfig& c, const MatrixPotential& v, RunResult& r) {
  Spectrum sp = negative_spectrum(v, spectrum_options(c));
  r.report["results"] = {{"spectrum", spectrum_json(sp)},
                         {"lt_moment_half", lt_moment(sp, 0.5)},
                         {"lt_moment_one", lt_moment(sp, 1.0)},
                         {"lt_moment_three_halves", lt_moment(sp, 1.5)}};
  add(r, "degeneracy_bound", max_resolved_multiplicity(sp) <= v.dim, max_resolved_multiplicity(sp), v.dim,
      "resolved multiplicities never exceed N");
  r.spectrum = std::move(sp);
}

json ground_json(const GroundState& gs, const Grid& g) {
  return {{"lambda1", gs.lambda1},
          {"K", gs.K},
          {"edge_x", g.node(gs.edge_node)},
          {"edge_eigenvalues", rvec_json(gs.edge_eigenvalues)},
          {"degeneracy_tol", gs.degeneracy_tol},
          {"hermiticity_defect", gs.F.max_hermiticity_defect}};
}

void run_shoot(const ExperimentConfig& c, const MatrixPotential& v, RunResult& r) {
  const GroundState gs = locate_ground_state(v, shoot_options(c));
  const double fd = -ground_energy(assemble(v), 1e-10 * std::max(1.0, gs.lambda1));
  const double diff = std::abs(gs.lambda1 - fd);
  r.report["results"] = {{"ground_state", ground_json(gs, v.grid)}, {"fd_lambda1", fd}};
  add(r, "fd_agreement", diff <= 1e-5 * std::max(1.0, gs.lambda1), diff, 1e-5 * std::max(1.0, gs.lambda1),
      "shooting and finite-difference ground energies agree");
  add(r, "degeneracy_bound", gs.K <= v.dim, gs.K, v.dim);
  add(r, "hermiticity", gs.F.max_hermiticity_defect <= 1e-8 * std::sqrt(gs.lambda1), gs.F.max_hermiticity_defect,
      1e-8 * std::sqrt(gs.lambda1));
  r.braid_grid = v.grid;
  r.braid = gs.F.samples;
}

void run_transform(const ExperimentConfig& c, const MatrixPotential& v, RunResult& r) {
  const GroundState gs = locate_ground_state(v, shoot_options(c));
  const MatrixField vn = darboux_transform(v, gs);
  const double m2 = potential_moment(v, 2);
  const double res = trace_identity_residual(v, vn, gs);
  const Spectrum before = negative_spectrum(v, spectrum_options(c));
  Spectrum after = negative_spectrum(vn, spectrum_options(c));

  // Old spectrum minus the K ground states, compared where the box resolves it.
  const std::vector<double> old_all = expanded(before);
  const std::vector<double> fresh = expanded(after);
  std::vector<double> expect;
  for (std::size_t i = static_cast<std::size_t>(gs.K); i < old_all.size(); ++i)
    if (old_all[i] > 2.0 * before.marginal_floor) expect.push_back(old_all[i]);
  double worst = 0.0;
  bool ok = fresh.size() + static_cast<std::size_t>(gs.K) <= old_all.size() && fresh.size() >= expect.size();
  for (std::size_t i = 0; ok && i < expect.size(); ++i) {
    const double d = std::abs(fresh[i] - expect[i]) / std::max(1.0, expect[i]);
    worst = std::max(worst, d);
  }
  ok = ok && worst <= 1e-4;

  r.report["results"] = {{"ground_state", ground_json(gs, v.grid)},
                         {"spectrum_before", spectrum_json(before)},
                         {"spectrum_after", spectrum_json(after)},
                         {"int_tr_v2_before", m2},
                         {"int_tr_v2_after", potential_moment(vn, 2)},
                         {"trace_identity_residual", res}};
  add(r, "trace_identity", std::abs(res) <= 1e-4 * m2, std::abs(res), 1e-4 * m2,
      "int Tr(V-2F')^2 = int Tr V^2 - (16/3) K lambda1^{3/2}");
  add(r, "eigenvalue_removal", ok, worst, 1e-4, "new spectrum equals the old one minus the ground multiplet");
  r.spectrum = std::move(after);
  r.braid_grid = v.grid;
  r.braid = gs.F.samples;
}

void run_strip(const ExperimentConfig& c, const MatrixPotential& v, RunResult& r) {
  StripOptions so;
  so.cutoff_threshold = c.cutoff_threshold;
  so.max_steps = c.max_steps;
  so.degeneracy_tol = c.degeneracy_tol;
  StrippingTrace tr = strip_all(v, so);
  json steps = json::array();
  for (const StripStep& s : tr.steps) steps.push_back(step_json(s));
  json rem = json::array();
  for (const Multiplet& m : tr.remaining) rem.push_back({{"lambda", m.lambda}, {"multiplicity", m.multiplicity}});
  const double target = (3.0 / 16.0) * tr.initial_moment;
  r.report["results"] = {
      {"steps", steps},
      {"step_count", tr.steps.size()},
      {"remaining", rem},
      {"marginal_floor", tr.marginal_floor},
      {"initial_moment", tr.initial_moment},
      {"deficit", tr.deficit},
      {"residual_moment", tr.residual_moment},
      {"marginal_allowance", tr.marginal_allowance},
      {"total_error", tr.total_error},
      {"max_telescoping_drift", tr.max_telescoping_drift},
      {"complete", tr.complete},
      {"final_potential", {{"int_tr_v2", potential_moment(tr.final_potential, 2)},
                           {"support_half_width", tr.final_potential.support_half_width()}}},
      {"error_model",
       "e_i = discarded tail mass + N * cutoff_threshold * domain width (a surrogate bound); "
       "each remaining continuum-marginal eigenvalue adds marginal_floor^{3/2}"}};
  add(r, "telescoping", tr.telescoping_ok, tr.max_telescoping_drift, 1e-3 * target,
      "running removed sum + (3/16) current moment stays at (3/16) int Tr V^2");
  add(r, "ledger", tr.deficit <= tr.total_error + 1e-6, tr.deficit, tr.total_error + 1e-6,
      "deficit <= sum e_i + marginal allowance");
  add(r, "complete", tr.complete, static_cast<double>(tr.steps.size()), 0.0,
      "only continuum-marginal eigenvalues remain");
  r.trace = std::move(tr);
}

void run_verify(const ExperimentConfig& c, const MatrixPotential& v, RunResult& r) {
  const SpectrumOptions so = spectrum_options(c);
  Spectrum sp = negative_spectrum(v, so);
  const Theorem1Verdict t = verify_theorem1(v, so);
  const HalfMomentVerdict hm = half_moment_bounds(v, so);
  r.report["results"] = {
      {"spectrum", spectrum_json(sp)},
      {"theorem1", {{"lhs", t.lhs}, {"rhs", t.rhs}, {"deficit", t.deficit}, {"pass", t.pass}}},
      {"half_moment",
       {{"moment", hm.moment}, {"lower", hm.lower}, {"upper", hm.upper}, {"tol", hm.tol}, {"pass", hm.pass}}}};
  add(r, "theorem1", t.pass, t.deficit, 1e-6 * std::max(1.0, t.rhs),
      "sum lambda^{3/2} <= (3/16) int Tr V^2");
  add(r, "half_moment", hm.pass, hm.moment, hm.upper + hm.tol,
      "-(1/4) int Tr V <= sum lambda^{1/2} <= -(1/2) int Tr V");
  r.spectrum = std::move(sp);
}

void run_sweep(const ExperimentConfig& c, const Grid& grid, RunResult& r) {
  const std::size_t n = c.depths.size();
  std::vector<SweepRow> rows(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        PotentialSpec ps = c.potential;
        ps.depth = c.depths[i];
        const MatrixPotential v = build_potential(ps, grid);
        const Spectrum sp = negative_spectrum(v, spectrum_options(c));
        SweepRow& row = rows[i];
        row.depth = c.depths[i];
        row.lhs = lt_moment(sp, 1.5);
        row.rhs = (3.0 / 16.0) * potential_moment(v, 2);
        row.bound_states = sp.total_count();
        row.value = c.metric == "deficit" ? row.lhs - row.rhs : (row.rhs > 0.0 ? row.lhs / row.rhs : 0.0);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = std::min<int>(sweep_threads(c.threads), static_cast<int>(std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) throw NumericalError("sweep point " + fmt(c.depths[i]) + ": " + errors[i]);

  json pts = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < n; ++i) {
    const SweepRow& row = rows[i];
    pts.push_back({{"depth", row.depth},
                   {c.metric, row.value},
                   {"lhs", row.lhs},
                   {"rhs", row.rhs},
                   {"bound_states", row.bound_states}});
    if (i > 0 && !(row.value > rows[i - 1].value)) monotone = false;
    add(r, "theorem1[depth=" + fmt(row.depth) + "]", row.lhs - row.rhs <= 1e-6 * std::max(1.0, row.rhs),
        row.lhs - row.rhs, 1e-6 * std::max(1.0, row.rhs));
  }
  r.report["results"] = {{"metric", c.metric}, {"points", pts}, {"strictly_increasing", monotone}};
  r.sweep = std::move(rows);
  r.metric = c.metric;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("write to " + path + " failed");
}

}  // namespace

Command parse_command(const std::string& name) {
  static const std::map<std::string, Command> table{{"spectrum", Command::spectrum}, {"shoot", Command::shoot},
                                                    {"transform", Command::transform}, {"strip", Command::strip},
                                                    {"verify", Command::verify}, {"sweep", Command::sweep}};
  const auto it = table.find(name);
  if (it == table.end()) throw UsageError("unknown command '" + name + "'");
  return it->second;
}

std::string to_string(Command c) {
  switch (c) {
    case Command::spectrum: return "spectrum";
    case Command::shoot: return "shoot";
    case Command::transform: return "transform";
    case Command::strip: return "strip";
    case Command::verify: return "verify";
    case Command::sweep: return "sweep";
  }
  return "?";
}

Profile parse_profile(const std::string& name) {
  if (name == "fast") return Profile::fast;
  if (name == "fine") return Profile::fine;
  throw UsageError("unknown profile '" + name + "' (fast or fine)");
}

std::string to_string(Profile p) { return p == Profile::fast ? "fast" : "fine"; }

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "spectrum") return PlotKind::spectrum;
  if (name == "braid") return PlotKind::braid;
  if (name == "sweep") return PlotKind::sweep;
  if (name == "trace") return PlotKind::trace;
  throw UsageError("unknown plot kind '" + name + "'");
}

std::string to_string(PlotKind k) {
  switch (k) {
    case PlotKind::spectrum: return "spectrum";
    case PlotKind::braid: return "braid";
    case PlotKind::sweep: return "sweep";
    case PlotKind::trace: return "trace";
  }
  return "?";
}

PotentialSpec parse_well_spec(const std::vector<std::string>& tokens) {
  const auto kv = keyed_items(tokens, {"depth", "a", "dim"}, "--well");
  if (kv.count("structure")) throw UsageError("--well: unknown key 'structure'");
  PotentialSpec p;
  p.kind = PotentialSpec::Kind::well;
  if (auto it = kv.find("depth"); it != kv.end()) p.depth = parse_double(it->second, "depth");
  if (auto it = kv.find("a"); it != kv.end()) p.a = parse_double(it->second, "a");
  if (auto it = kv.find("dim"); it != kv.end()) p.dim = static_cast<int>(parse_int(it->second, "dim"));
  return p;
}

PotentialSpec parse_random_spec(const std::vector<std::string>& tokens) {
  const auto kv = keyed_items(tokens, {"seed", "dim", "a", "strength"}, "--random");
  PotentialSpec p;
  p.kind = PotentialSpec::Kind::random;
  if (auto it = kv.find("seed"); it != kv.end()) {
    const long long s = parse_int(it->second, "seed");
    if (s < 0) throw UsageError("--random: seed must be non-negative");
    p.seed = static_cast<std::uint64_t>(s);
  }
  if (auto it = kv.find("dim"); it != kv.end()) p.dim = static_cast<int>(parse_int(it->second, "dim"));
  if (auto it = kv.find("a"); it != kv.end()) p.a = parse_double(it->second, "a");
  if (auto it = kv.find("strength"); it != kv.end()) p.depth = parse_double(it->second, "strength");
  if (auto it = kv.find("structure"); it != kv.end()) {
    if (it->second == "full")
      p.structure = RandomStructure::full;
    else if (it->second == "diagonal")
      p.structure = RandomStructure::diagonal;
    else
      throw UsageError("--random: structure must be full or diagonal");
  }
  return p;
}

Grid parse_grid_spec(const std::string& text) {
  const auto items = split_items({text});
  if (items.size() != 3) throw UsageError("--grid expects x_min,x_max,n");
  const double lo = parse_double(items[0], "x_min");
  const double hi = parse_double(items[1], "x_max");
  const long long n = parse_int(items[2], "n");
  if (n < 3 || n > 50'000'000) throw UsageError("--grid: n out of range");
  try {
    return make_uniform_grid(lo, hi, static_cast<int>(n));
  } catch (const ParameterError& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  }
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& s : split_items({text})) out.push_back(parse_double(s, "list entry"));
  return out;
}

void ExperimentConfig::validate() const {
  if (cluster_tol < 0.0) throw UsageError("cluster tolerance must be positive");
  if (degeneracy_tol < 0.0) throw UsageError("degeneracy tolerance must be positive");
  if (!(cutoff_threshold > 0.0)) throw UsageError("cutoff threshold must be positive");
  if (max_steps < 0) throw UsageError("max_steps must be non-negative");
  if (potential.kind == PotentialSpec::Kind::file) {
    if (potential.path.empty()) throw UsageError("potential file path is empty");
  } else {
    if (potential.dim < 1 || potential.dim > kMaxDim)
      throw UsageError("dim must be between 1 and " + std::to_string(kMaxDim));
    if (!(potential.a > 0.0)) throw UsageError("support half-width a must be positive");
    if (potential.depth < 0.0) throw UsageError("depth/strength must be non-negative");
  }
  if (command == Command::sweep) {
    if (depths.empty()) throw UsageError("sweep needs --depths");
    if (potential.kind == PotentialSpec::Kind::file) throw UsageError("sweep needs a generated potential");
    for (double d : depths)
      if (d < 0.0) throw UsageError("sweep depths must be non-negative");
  }
  if (metric != "lt_ratio" && metric != "deficit") throw UsageError("unknown metric '" + metric + "'");
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  static const std::vector<std::string> known{"command", "well",  "random",  "potential_file", "grid",
                                              "profile", "cluster_tol", "deg_tol", "cutoff", "max_steps",
                                              "depths",  "metric", "out", "csv", "plot", "threads"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw UsageError("config: unknown key '" + key + "'");

  auto spec_tokens = [](const json& v, const std::vector<std::string>& order) {
    std::vector<std::string> tokens;
    if (v.is_string()) {
      tokens.push_back(v.get<std::string>());
    } else if (v.is_object()) {
      for (const auto& [k, x] : v.items()) {
        if (std::find(order.begin(), order.end(), k) == order.end() && k != "structure")
          throw UsageError("config: unknown potential key '" + k + "'");
        std::string val;
        if (x.is_string())
          val = x.get<std::string>();
        else if (x.is_number_integer())
          val = std::to_string(x.get<long long>());
        else if (x.is_number())
          val = fmt(x.get<double>());
        else
          throw UsageError("config: bad value for '" + k + "'");
        tokens.push_back(k + "=" + val);
      }
    } else {
      throw UsageError("config: potential must be a string or object");
    }
    return tokens;
  };
  auto number = [](const json& v, const char* key) {
    if (!v.is_number()) throw UsageError(std::string("config: '") + key + "' must be a number");
    return v.get<double>();
  };
  auto text = [](const json& v, const char* key) {
    if (!v.is_string()) throw UsageError(std::string("config: '") + key + "' must be a string");
    return v.get<std::string>();
  };

  const int sources = static_cast<int>(j.contains("well")) + static_cast<int>(j.contains("random")) +
                      static_cast<int>(j.contains("potential_file"));
  if (sources > 1) throw UsageError("config: give only one of well, random, potential_file");

  if (j.contains("command")) c.command = parse_command(text(j["command"], "command"));
  if (j.contains("well")) c.potential = parse_well_spec(spec_tokens(j["well"], {"depth", "a", "dim"}));
  if (j.contains("random"))
    c.potential = parse_random_spec(spec_tokens(j["random"], {"seed", "dim", "a", "strength"}));
  if (j.contains("potential_file")) {
    c.potential = PotentialSpec{};
    c.potential.kind = PotentialSpec::Kind::file;
    c.potential.path = text(j["potential_file"], "potential_file");
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (g.is_string()) {
      c.grid = parse_grid_spec(g.get<std::string>());
    } else if (g.is_array() && g.size() == 3 && g[0].is_number() && g[1].is_number() &&
               g[2].is_number_integer()) {
      c.grid = parse_grid_spec(fmt(g[0].get<double>()) + "," + fmt(g[1].get<double>()) + "," +
                               std::to_string(g[2].get<long long>()));
    } else {
      throw UsageError("config: grid must be [x_min, x_max, n]");
    }
  }
  if (j.contains("profile")) c.profile = parse_profile(text(j["profile"], "profile"));
  if (j.contains("cluster_tol")) c.cluster_tol = number(j["cluster_tol"], "cluster_tol");
  if (j.contains("deg_tol")) c.degeneracy_tol = number(j["deg_tol"], "deg_tol");
  if (j.contains("cutoff")) c.cutoff_threshold = number(j["cutoff"], "cutoff");
  if (j.contains("max_steps")) c.max_steps = static_cast<int>(number(j["max_steps"], "max_steps"));
  if (j.contains("threads")) c.threads = static_cast<int>(number(j["threads"], "threads"));
  if (j.contains("depths")) {
    const json& d = j["depths"];
    if (d.is_string()) {
      c.depths = parse_number_list(d.get<std::string>());
    } else if (d.is_array()) {
      c.depths.clear();
      for (const json& x : d) c.depths.push_back(number(x, "depths"));
    } else {
      throw UsageError("config: depths must be a list");
    }
  }
  if (j.contains("metric")) c.metric = text(j["metric"], "metric");
  if (j.contains("out")) c.out_path = text(j["out"], "out");
  if (j.contains("csv")) c.csv_path = text(j["csv"], "csv");
  if (j.contains("plot")) c.plot = parse_plot_kind(text(j["plot"], "plot"));
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["command"] = to_string(c.command);
  const PotentialSpec& p = c.potential;
  switch (p.kind) {
    case PotentialSpec::Kind::well:
      j["well"] = {{"depth", p.depth}, {"a", p.a}, {"dim", p.dim}};
      break;
    case PotentialSpec::Kind::random:
      j["random"] = {{"seed", p.seed},
                     {"dim", p.dim},
                     {"a", p.a},
                     {"strength", p.depth},
                     {"structure", p.structure == RandomStructure::full ? "full" : "diagonal"}};
      break;
    case PotentialSpec::Kind::file:
      j["potential_file"] = p.path;
      break;
  }
  if (c.grid) j["grid"] = {c.grid->x_min, c.grid->x_max, c.grid->n_points};
  j["profile"] = to_string(c.profile);
  j["cluster_tol"] = c.cluster_tol;
  j["deg_tol"] = c.degeneracy_tol;
  j["cutoff"] = c.cutoff_threshold;
  j["max_steps"] = c.max_steps;
  if (c.command == Command::sweep) {
    j["depths"] = c.depths;
    j["metric"] = c.metric;
  }
  if (!c.out_path.empty()) j["out"] = c.out_path;
  if (!c.csv_path.empty()) j["csv"] = c.csv_path;
  if (c.plot) j["plot"] = to_string(*c.plot);
  return j;
}

Grid profile_grid(Profile p) {
  if (p == Profile::fine) return make_uniform_grid(-15.0, 15.0, 60001);
  return make_uniform_grid(-12.0, 12.0, 6001);
}

Grid resolve_grid(const ExperimentConfig& c) { return c.grid ? *c.grid : profile_grid(c.profile); }

MatrixPotential build_potential(const PotentialSpec& spec, const Grid& grid) {
  switch (spec.kind) {
    case PotentialSpec::Kind::well:
      return square_well(spec.depth, spec.a, spec.dim, grid);
    case PotentialSpec::Kind::random:
      return random_potential(spec.seed, spec.dim, spec.a, spec.depth, grid, spec.structure);
    case PotentialSpec::Kind::file:
      return read_potential(spec.path);
  }
  throw UsageError("unknown potential kind");
}

int sweep_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SPECTRALSTRIP_THREADS"); env && *env) {
    const long long n = parse_int(env, "SPECTRALSTRIP_THREADS");
    if (n < 1) throw UsageError("SPECTRALSTRIP_THREADS must be at least 1");
    return static_cast<int>(std::min<long long>(n, 1024));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

RunResult run(const ExperimentConfig& config) {
  RunResult r;
  r.report["schema_version"] = kSchemaVersion;
  r.report["command"] = to_string(config.command);
  r.report["inputs"] = config_to_json(config);
  try {
    config.validate();
    const Grid grid = resolve_grid(config);
    if (config.command == Command::sweep) {
      r.report["inputs"]["resolved_grid"] = grid_json(grid);
      run_sweep(config, grid, r);
    } else {
      const MatrixPotential v = build_potential(config.potential, grid);
      r.report["inputs"]["potential"] = potential_summary(v);
      switch (config.command) {
        case Command::spectrum: run_spectrum(config, v, r); break;
        case Command::shoot: run_shoot(config, v, r); break;
        case Command::transform: run_transform(config, v, r); break;
        case Command::strip: run_strip(config, v, r); break;
        case Command::verify: run_verify(config, v, r); break;
        case Command::sweep: break;
      }
    }
    r.status = std::all_of(r.verdicts.begin(), r.verdicts.end(), [](const Verdict& v) { return v.pass; }) ? 0 : 1;
  } catch (const UsageError& e) {
    r.status = 2;
    r.report["error"] = {{"kind", "usage"}, {"message", e.what()}};
  } catch (const ParameterError& e) {
    r.status = 2;
    r.report["error"] = {{"kind", "parameter"}, {"message", e.what()}};
  } catch (const std::exception& e) {
    r.status = 1;
    r.report["error"] = {{"kind", "numerical"}, {"message", e.what()}};
  }
  json vs = json::array();
  for (const Verdict& v : r.verdicts)
    vs.push_back({{"name", v.name}, {"pass", v.pass}, {"value", v.value}, {"bound", v.bound}, {"detail", v.detail}});
  r.report["verdicts"] = vs;
  r.report["status"] = r.status;
  return r;
}

PlotKind default_plot_kind(Command c) {
  switch (c) {
    case Command::spectrum:
    case Command::verify: return PlotKind::spectrum;
    case Command::shoot:
    case Command::transform: return PlotKind::braid;
    case Command::strip: return PlotKind::trace;
    case Command::sweep: return PlotKind::sweep;
  }
  return PlotKind::spectrum;
}

std::string emit_plot_data(const RunResult& result, PlotKind kind) {
  std::ostringstream out;
  out << "# spectralstrip-csv v1 kind=" << to_string(kind) << '\n';
  switch (kind) {
    case PlotKind::spectrum: {
      if (!result.spectrum) throw UsageError("no spectrum in this result");
      out << "index,lambda,multiplicity,marginal\n";
      int i = 0;
      for (const Multiplet& m : result.spectrum->multiplets)
        out << i++ << ',' << fmt(m.lambda) << ',' << m.multiplicity << ',' << (m.marginal ? 1 : 0) << '\n';
      break;
    }
    case PlotKind::braid: {
      if (!result.braid || !result.braid_grid) throw UsageError("no Riccati field in this result");
      const int n = result.braid->dim();
      out << "x";
      if (n == 1)
        out << ",f";
      else
        for (int k = 1; k <= n; ++k) out << ",f" << k;
      out << '\n';
      for (int i = 0; i < result.braid->size(); ++i) {
        const Mat f = (*result.braid)[i];
        Eigen::SelfAdjointEigenSolver<Mat> es(f, Eigen::EigenvaluesOnly);
        out << fmt(result.braid_grid->node(i));
        for (int k = 0; k < n; ++k) out << ',' << fmt(es.eigenvalues()(k));
        out << '\n';
      }
      break;
    }
    case PlotKind::sweep: {
      if (result.sweep.empty()) throw UsageError("no sweep in this result");
      out << "depth," << result.metric << '\n';
      for (const SweepRow& row : result.sweep) out << fmt(row.depth) << ',' << fmt(row.value) << '\n';
      break;
    }
    case PlotKind::trace: {
      if (!result.trace) throw UsageError("no stripping trace in this result");
      out << "step,lambda,K,moment_before,moment_after,identity_residual,cutoff_radius,effective_threshold,tail_mass,e\n";
      int i = 1;
      for (const StripStep& s : result.trace->steps)
        out << i++ << ',' << fmt(s.lambda) << ',' << s.K << ',' << fmt(s.moment_before) << ','
            << fmt(s.moment_after) << ',' << fmt(s.identity_residual) << ',' << fmt(s.cutoff_radius) << ','
            << fmt(s.effective_threshold) << ',' << fmt(s.tail_mass) << ',' << fmt(s.e) << '\n';
      break;
    }
  }
  return out.str();
}

RunResult run_and_write(const ExperimentConfig& config) {
  RunResult r = run(config);
  if (!config.csv_path.empty() && !r.report.contains("error")) {
    const PlotKind kind = config.plot ? *config.plot : default_plot_kind(config.command);
    try {
      write_text(config.csv_path, emit_plot_data(r, kind));
    } catch (const UsageError& e) {
      r.status = 2;
      r.report["error"] = {{"kind", "usage"}, {"message", e.what()}};
      r.report["status"] = r.status;
    } catch (const Error& e) {
      r.status = 1;
      r.report["error"] = {{"kind", "io"}, {"message", e.what()}};
      r.report["status"] = r.status;
    }
  }
  if (!config.out_path.empty()) write_text(config.out_path, r.report.dump(2) + "\n");
  return r;
}

}  // namespace spectralstrip
