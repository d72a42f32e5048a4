#pragma once

#include <functional>
#include <vector>

namespace windcast::optim {

struct NelderMeadOptions {
  double f_tolerance = 1e-6;  ///< stop when max f - min f over the simplex falls below this
  int max_iterations = 500;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Derivative-free simplex minimization. The initial simplex is x0 plus one vertex per
/// coordinate displaced by `step[i]`. Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const std::vector<double>& step, const NelderMeadOptions& opt = {});

}  // namespace windcast::optim
