#include "dopnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dopnet {

GradCheckReport grad_check(const DifferentiableOp& op, const std::vector<Tensor>& inputs,
                           double eps, const GradCheckOptions& options) {
  if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be positive");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Tensor out = op.forward(inputs);
  Tensor cotangent(out.shape());
  for (double& v : cotangent.data()) v = normal(rng);

  const std::vector<Tensor> analytic = op.backward(inputs, cotangent);
  if (analytic.size() != inputs.size()) {
    throw ValidationError("grad_check(" + op.name + "): backward returned " +
                          std::to_string(analytic.size()) + " gradients for " +
                          std::to_string(inputs.size()) + " inputs");
  }

  GradCheckReport report;
  report.op_name = op.name;
  report.eps = eps;

  std::vector<Tensor> probe = inputs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (analytic[t].empty()) continue;
    require_shape(analytic[t], inputs[t].shape(), "grad_check analytic gradient");

    std::vector<std::size_t> idx(inputs[t].size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_probes && idx.size() > options.max_probes) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_probes);
      std::sort(idx.begin(), idx.end());
    }

    for (std::size_t i : idx) {
      const double x0 = inputs[t][i];
      probe[t][i] = x0 + eps;
      const double lp = dot(op.forward(probe), cotangent);
      probe[t][i] = x0 - eps;
      const double lm = dot(op.forward(probe), cotangent);
      probe[t][i] = x0;

      const double numeric = (lp - lm) / (2.0 * eps);
      const double a = analytic[t][i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (!std::isfinite(err)) {
        throw NumericalError("grad_check(" + op.name + "): non-finite gradient");
      }
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.argmax_input = t;
        report.argmax_index = i;
      }
      ++report.probes;
    }
  }
  return report;
}

}  // namespace dopnet
