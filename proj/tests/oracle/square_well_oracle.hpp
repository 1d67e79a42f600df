#pragma once

// Bound states of -u'' - V0 chi_[-a,a] u = -lambda u on the whole line.
// With k = sqrt(V0 - lambda), kappa = sqrt(lambda):
//   even: k sin(ka) - kappa cos(ka) = 0   (k tan(ka) = kappa)
//   odd:  k cos(ka) + kappa sin(ka) = 0   (-k cot(ka) = kappa)
// Written without tan/cot so every sign change on a fine k mesh is a root.
// Depends on nothing from the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// All lambda > min_lambda, descending.
inline std::vector<double> square_well_levels(double v0, double a, double min_lambda = 1e-12) {
  const double kmax = std::sqrt(v0);
  auto kappa = [v0](double k) { return std::sqrt(std::max(0.0, v0 - k * k)); };
  const std::function<double(double)> even = [&](double k) { return k * std::sin(k * a) - kappa(k) * std::cos(k * a); };
  const std::function<double(double)> odd = [&](double k) { return k * std::cos(k * a) + kappa(k) * std::sin(k * a); };

  std::vector<double> out;
  const int mesh = 200000;
  for (const auto* f : {&even, &odd}) {
    double prev_k = 0.0;
    double prev = (*f)(prev_k);
    for (int i = 1; i <= mesh; ++i) {
      const double k = kmax * i / mesh;
      const double cur = (*f)(k);
      if (prev == 0.0 && i > 1) {
        out.push_back(v0 - prev_k * prev_k);
      } else if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
        const double root = bisect(*f, prev_k, k);
        out.push_back(v0 - root * root);
      }
      prev_k = k;
      prev = cur;
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [min_lambda](double l) { return !(l > min_lambda); }), out.end());
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

inline double ground_level(double v0, double a) { return square_well_levels(v0, a).front(); }

// sum lambda^{3/2} / ((3/16) * 2 a v0^2)
inline double lt_ratio(double v0, double a) {
  double s = 0.0;
  for (double l : square_well_levels(v0, a)) s += std::pow(l, 1.5);
  return s / ((3.0 / 16.0) * 2.0 * a * v0 * v0);
}

}  // namespace oracle
