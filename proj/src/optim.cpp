#include "windcast/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "windcast/core.hpp"

namespace windcast::optim {

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const std::vector<double>& step, const NelderMeadOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0 || step.size() != n) throw ParameterError("simplex dimension mismatch");

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  auto along = [&](double t, std::vector<double>& out) {
    // centroid + t * (centroid - worst)
    const auto& worst = pts[order[n]];
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (centroid[j] - worst[j]);
  };

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    // Stable ordering keeps the run deterministic when values tie.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const double best = vals[order[0]], worst = vals[order[n]];
    if (std::isfinite(worst) && worst - best < opt.f_tolerance) {
      res.converged = true;
      break;
    }
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[order[k]][j] / static_cast<double>(n);

    along(opt.reflection, xr);
    const double fr = eval(xr);
    const double second_worst = vals[order[n - 1]];
    if (fr < best) {
      along(opt.reflection * opt.expansion, xe);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[order[n]] = xe;
        vals[order[n]] = fe;
      } else {
        pts[order[n]] = xr;
        vals[order[n]] = fr;
      }
      continue;
    }
    if (fr < second_worst) {
      pts[order[n]] = xr;
      vals[order[n]] = fr;
      continue;
    }
    // Contraction: outside if the reflected point beats the worst, inside otherwise.
    const bool outside = fr < worst;
    along(outside ? opt.contraction * opt.reflection : -opt.contraction, xc);
    const double fc = eval(xc);
    if (fc < (outside ? fr : worst)) {
      pts[order[n]] = xc;
      vals[order[n]] = fc;
      continue;
    }
    const auto& xb = pts[order[0]];
    for (std::size_t k = 1; k <= n; ++k) {
      auto& p = pts[order[k]];
      for (std::size_t j = 0; j < n; ++j) p[j] = xb[j] + opt.shrink * (p[j] - xb[j]);
      vals[order[k]] = eval(p);
    }
  }

  const auto best =
      static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

}  // namespace windcast::optim
