#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "seqslu/autodiff.hpp"

namespace seqslu {

struct GradReport {
  struct Entry {
    std::string name;
    double max_rel_error = 0.0;
  };
  std::vector<Entry> per_param;
  double max_rel_error = 0.0;
  double threshold = 1e-4;
  bool pass = true;
  // Coordinates whose perturbation changed a discrete decision (see below).
  size_t skipped = 0;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

struct GradCheckOptions {
  double eps = 1e-5;
  double threshold = 1e-4;
  // Optional fingerprint of discrete choices made during the last evaluation
  // of f (e.g. argmax feedback). When it differs between the base point and
  // a perturbed point the function is not differentiable along that
  // coordinate, and the coordinate is skipped.
  std::function<std::vector<int>()> discrete_state;
  // When > 0, only this many randomly chosen coordinates of each parameter
  // are perturbed.
  int64_t max_coords_per_param = 0;
  // 2: (f(p+h) - f(p-h)) / 2h. 4: adds the +-2h points, error O(h^4).
  int stencil = 2;
  uint64_t sample_seed = 0;
};

// Central differences (f(p+eps) - f(p-eps)) / (2 eps) against the analytic
// gradient of every element of every named parameter. f must rebuild its
// graph from the parameters on each call. Throws NumericalError if f is not
// finite.
GradReport grad_check(const std::function<Var<double>()>& f,
                      const std::vector<std::pair<std::string, Var<double>>>& params,
                      const GradCheckOptions& opts = {});

}  // namespace seqslu
