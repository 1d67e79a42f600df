#include "spectralstrip/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace spectralstrip {

namespace {

constexpr double kHermitianTol = 1e-12;

// Nodes within this many ulps-of-h of an edge count as sitting on it.
constexpr double kEdgeSnap = 1e-9;

double edge_weight(double x, double a, double h) {
  const double d = std::abs(x) - a;
  if (std::abs(d) <= kEdgeSnap * h) return 0.5;
  return d < 0.0 ? 1.0 : 0.0;
}

void require_contains(const Grid& grid, double a) {
  if (!(a > 0.0)) throw ParameterError("support half-width must be positive");
  if (!(grid.x_min < -a && grid.x_max > a))
    throw ParameterError("grid [" + std::to_string(grid.x_min) + ", " + std::to_string(grid.x_max) +
                         "] does not strictly contain the support [-a, a] with a = " +
                         std::to_string(a));
}

// 53-bit uniform double in [-1, 1) straight from the engine, so the stream is
// identical across standard libraries.
double uniform_pm1(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

}  // namespace

int Grid::nearest_index(double x) const {
  const long i = std::lround((x - x_min) / h);
  return static_cast<int>(std::clamp<long>(i, 0, n_points - 1));
}

Grid make_uniform_grid(double x_min, double x_max, int n_points) {
  if (n_points < 3) throw ParameterError("grid needs at least 3 points");
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < x_max))
    throw ParameterError("grid requires finite x_min < x_max");
  Grid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.n_points = n_points;
  g.h = (x_max - x_min) / (n_points - 1);
  return g;
}

MatrixField::MatrixField(Grid g, int n) : grid(g), dim(n) {
  if (n < 1 || n > kMaxDim)
    throw ParameterError("matrix dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  samples = MatrixSeries(n, grid.n_points);
}

double MatrixField::max_hermiticity_defect() const {
  double worst = 0.0;
  for (int i = 0; i < samples.size(); ++i) {
    const Mat m = samples[i];
    worst = std::max(worst, (m - m.adjoint()).norm());
  }
  return worst;
}

double MatrixField::max_norm2() const {
  double worst = 0.0;
  for (int i = 0; i < samples.size(); ++i) {
    const Mat m = samples[i];
    if (m.isZero(0.0)) continue;
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    worst = std::max(worst, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  return worst;
}

std::pair<int, int> MatrixField::support_indices() const {
  int first = -1;
  int last = -1;
  for (int i = 0; i < size(); ++i) {
    if (!(*this)[i].isZero(0.0)) {
      if (first < 0) first = i;
      last = i;
    }
  }
  return {first, last};
}

MatrixPotential::MatrixPotential(MatrixField field, double support_half_width)
    : MatrixField(std::move(field)), a_(support_half_width) {
  require_contains(grid, a_);
  if (samples.size() != grid.n_points || samples.dim() != dim)
    throw ParameterError("sample count does not match the grid");
  for (int i = 0; i < size(); ++i) {
    const Mat m = (*this)[i];
    if (!m.allFinite()) throw ParameterError("non-finite potential sample");
    if ((m - m.adjoint()).norm() > kHermitianTol * std::max(1.0, m.norm()))
      throw ParameterError("potential sample is not hermitian at node " + std::to_string(i));
    const double x = grid.node(i);
    if (std::abs(x) > a_ + kEdgeSnap * grid.h && !m.isZero(0.0))
      throw ParameterError("potential is nonzero outside [-a, a] at node " + std::to_string(i));
  }
}

MatrixPotential square_well(double depth, double a, int dim, const Grid& grid) {
  if (!(depth > 0.0)) throw ParameterError("well depth must be positive");
  return diagonal_well(std::vector<double>(static_cast<std::size_t>(dim), depth), a, grid);
}

MatrixPotential diagonal_well(const std::vector<double>& depths, double a, const Grid& grid) {
  require_contains(grid, a);
  const int dim = static_cast<int>(depths.size());
  MatrixField f(grid, dim);
  for (int i = 0; i < grid.n_points; ++i) {
    const double w = edge_weight(grid.node(i), a, grid.h);
    if (w == 0.0) continue;
    for (int k = 0; k < dim; ++k) f[i](k, k) = -w * depths[static_cast<std::size_t>(k)];
  }
  return MatrixPotential(std::move(f), a);
}

double bump(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - t * t));
}

MatrixPotential random_potential(std::uint64_t seed, int dim, double a, double strength,
                                 const Grid& grid, RandomStructure structure) {
  if (dim < 1 || dim > kMaxDim) throw ParameterError("random_potential: bad dimension");
  if (!(strength > 0.0)) throw ParameterError("random_potential: strength must be positive");
  require_contains(grid, a);

  // B_jk(x) = sum_m c_m cos(m pi x / a) + s_m sin(m pi x / a), m = 0..2,
  // complex coefficients. The full structure is scaled by 1/sqrt(dim) so each
  // entry of BB* stays O(1).
  constexpr int kHarmonics = 3;
  struct Entry {
    std::array<cplx, kHarmonics> c{};
    std::array<cplx, kHarmonics> s{};
  };
  std::mt19937_64 rng(seed);
  auto draw = [&rng] {
    Entry e;
    for (int m = 0; m < kHarmonics; ++m) {
      const double cr = uniform_pm1(rng), ci = uniform_pm1(rng);
      const double sr = uniform_pm1(rng), si = uniform_pm1(rng);
      e.c[m] = {cr, ci};
      e.s[m] = {sr, si};
    }
    return e;
  };

  std::vector<Entry> coeffs(static_cast<std::size_t>(dim * dim));
  std::vector<bool> present(coeffs.size(), false);
  auto slot = [dim](int j, int k) { return static_cast<std::size_t>(j * dim + k); };
  // The (0,0) entry is always drawn first so the diagonal variant embeds the
  // scalar generator.
  if (structure == RandomStructure::full) {
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) {
        coeffs[slot(j, k)] = draw();
        present[slot(j, k)] = true;
      }
  } else {
    for (int j = 0; j < dim; ++j) {
      coeffs[slot(j, j)] = draw();
      present[slot(j, j)] = true;
    }
  }

  const double norm =
      structure == RandomStructure::full ? 1.0 / std::sqrt(static_cast<double>(dim)) : 1.0;
  MatrixField f(grid, dim);
  Mat b(dim, dim);
  for (int i = 0; i < grid.n_points; ++i) {
    const double x = grid.node(i);
    const double env = bump(x / a);
    if (env == 0.0) continue;
    b.setZero();
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) {
        if (!present[slot(j, k)]) continue;
        const Entry& e = coeffs[slot(j, k)];
        cplx v = 0.0;
        for (int m = 0; m < kHarmonics; ++m) {
          const double arg = m * M_PI * x / a;
          v += e.c[m] * std::cos(arg) + e.s[m] * std::sin(arg);
        }
        b(j, k) = norm * v;
      }
    Mat v = -strength * env * (b * b.adjoint());
    f[i] = 0.5 * (v + v.adjoint());
  }
  return MatrixPotential(std::move(f), a);
}

double edge_band_norm(const MatrixField& field) {
  const int n = field.size();
  const int outer = std::max(1, n / 20);
  double m = 0.0;
  for (int i = 0; i < outer; ++i) m = std::max({m, field[i].norm(), field[n - 1 - i].norm()});
  return m;
}

Truncation truncate_support(const MatrixField& field, double threshold) {
  if (!(threshold > 0.0)) throw ParameterError("truncation threshold must be positive");
  const int n = field.size();
  auto norm_at = [&field](int i) { return field[i].norm(); };

  const double edge_max = edge_band_norm(field);
  if (edge_max >= 10.0 * threshold)
    throw DecayError("field does not decay inside the grid (edge norm " + std::to_string(edge_max) +
                     "); enlarge the domain");

  const Grid& g = field.grid;
  // Smallest c with ||field(x)|| < threshold for all |x| > c.
  double c = 0.0;
  for (int i = 0; i < n; ++i)
    if (norm_at(i) >= threshold) c = std::max(c, std::abs(g.node(i)));
  if (!(g.x_min < -c && g.x_max > c))
    throw DecayError("cutoff radius reaches the grid boundary; enlarge the domain");

  MatrixField out = field;
  double tail = 0.0;
  std::vector<double> q(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    if (std::abs(g.node(i)) > c) {
      q[static_cast<std::size_t>(i)] = (field[i] * field[i]).trace().real();
      out[i].setZero();
    }
  }
  // Trapezoid over the discarded nodes; intervals straddling the cutoff count
  // only their outside endpoint.
  for (int i = 0; i + 1 < n; ++i) tail += 0.5 * g.h * (q[i] + q[i + 1]);

  Truncation t;
  t.cutoff_radius = c;
  t.tail_mass = tail;
  // A zero field has no support; give it a nominal one so the potential is
  // still well-formed.
  const double a = c > 0.0 ? c : 0.5 * std::min(-g.x_min, g.x_max);
  t.potential = MatrixPotential(std::move(out), a);
  return t;
}

double potential_moment(const MatrixField& field, int power) {
  if (power != 1 && power != 2) throw ParameterError("potential_moment: power must be 1 or 2");
  const int n = field.size();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Mat m = field[i];
    const double v = power == 1 ? m.trace().real() : (m * m).trace().real();
    sum += (i == 0 || i == n - 1) ? 0.5 * v : v;
  }
  return sum * field.grid.h;
}

std::string potential_to_json(const MatrixPotential& v) {
  nlohmann::json j;
  j["grid"] = {{"x_min", v.grid.x_min}, {"x_max", v.grid.x_max}, {"n_points", v.grid.n_points}};
  j["dim"] = v.dim;
  j["a"] = v.support_half_width();
  nlohmann::json samples = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) {
    const Mat m = v[i];
    nlohmann::json node = nlohmann::json::array();
    for (int r = 0; r < v.dim; ++r)
      for (int c = 0; c < v.dim; ++c) node.push_back({m(r, c).real(), m(r, c).imag()});
    samples.push_back(std::move(node));
  }
  j["samples"] = std::move(samples);
  return j.dump();
}

MatrixPotential potential_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    const auto& jg = j.at("grid");
    const Grid g = make_uniform_grid(jg.at("x_min").get<double>(), jg.at("x_max").get<double>(),
                                     jg.at("n_points").get<int>());
    const int dim = j.at("dim").get<int>();
    const double a = j.at("a").get<double>();
    const auto& js = j.at("samples");
    if (static_cast<int>(js.size()) != g.n_points)
      throw ParameterError("potential file: sample count does not match n_points");
    MatrixField f(g, dim);
    for (int i = 0; i < g.n_points; ++i) {
      const auto& node = js[static_cast<std::size_t>(i)];
      if (static_cast<int>(node.size()) != dim * dim)
        throw ParameterError("potential file: node " + std::to_string(i) + " has wrong entry count");
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
          const auto& e = node[static_cast<std::size_t>(r * dim + c)];
          f[i](r, c) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
        }
    }
    return MatrixPotential(std::move(f), a);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("potential file: ") + e.what());
  }
}

void write_potential(const MatrixPotential& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot open " + path + " for writing");
  out << potential_to_json(v) << '\n';
}

MatrixPotential read_potential(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open potential file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return potential_from_json(ss.str());
}

void write_potential_csv(const MatrixField& field, std::ostream& out) {
  out << "# spectralstrip-csv v1 kind=potential\n";
  out << "x,tr_v,tr_v2\n";
  char buf[96];
  for (int i = 0; i < field.size(); ++i) {
    const Mat m = field[i];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", field.grid.node(i), m.trace().real(),
                  (m * m).trace().real());
    out << buf;
  }
}

}  // namespace spectralstrip
