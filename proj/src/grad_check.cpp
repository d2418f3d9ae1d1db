#include "seqslu/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "seqslu/errors.hpp"
#include "seqslu/rng.hpp"

namespace seqslu {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradReport grad_check(const std::function<Var<double>()>& f,
                      const std::vector<std::pair<std::string, Var<double>>>& params,
                      const GradCheckOptions& opts) {
  auto eval = [&]() {
    const double v = f().value()[0];
    if (!std::isfinite(v)) throw NumericalError("grad_check: objective is not finite");
    return v;
  };

  if (opts.stencil != 2 && opts.stencil != 4) throw std::invalid_argument("grad_check: stencil must be 2 or 4");
  if (!(opts.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  for (auto [name, p] : params) p.zero_grad();
  Var<double> loss = f();
  if (!std::isfinite(loss.value()[0])) throw NumericalError("grad_check: objective is not finite");
  backward(loss);
  std::vector<int> base_state;
  if (opts.discrete_state) base_state = opts.discrete_state();

  GradReport report;
  report.threshold = opts.threshold;
  Rng sampler(opts.sample_seed);
  for (auto [name, p] : params) {
    Tensor<double> analytic = p.has_grad() ? p.grad() : Tensor<double>(p.shape());
    Tensor<double>& theta = p.mutable_value();
    std::vector<int64_t> coords(static_cast<size_t>(theta.size()));
    for (int64_t i = 0; i < theta.size(); ++i) coords[static_cast<size_t>(i)] = i;
    if (opts.max_coords_per_param > 0 && theta.size() > opts.max_coords_per_param) {
      sampler.shuffle(coords);
      coords.resize(static_cast<size_t>(opts.max_coords_per_param));
    }
    double worst = 0.0;
    for (int64_t i : coords) {
      const double saved = theta[i];
      bool stable = true;
      auto at = [&](double offset) {
        theta[i] = saved + offset;
        const double v = eval();
        stable = stable && (!opts.discrete_state || opts.discrete_state() == base_state);
        return v;
      };
      const double h = opts.eps;
      double numeric = 0.0;
      if (opts.stencil == 4) {
        numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      } else {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      }
      theta[i] = saved;
      if (!stable) {
        ++report.skipped;
        continue;
      }
      worst = std::max(worst, relative_error(analytic[i], numeric));
    }
    report.per_param.push_back({name, worst});
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  report.pass = report.max_rel_error < opts.threshold;
  for (auto [name, p] : params) p.zero_grad();
  return report;
}

}  // namespace seqslu
