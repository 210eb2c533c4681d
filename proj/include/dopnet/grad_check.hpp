#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dopnet/tensor.hpp"

namespace dopnet {

/// A forward map plus its hand-written vector-Jacobian product. `backward`
/// returns one gradient per input; an empty Tensor marks an input as
/// non-differentiable (it is skipped by the checker).
struct DifferentiableOp {
  std::string name;
  std::function<Tensor(const std::vector<Tensor>&)> forward;
  std::function<std::vector<Tensor>(const std::vector<Tensor>&, const Tensor&)> backward;
};

struct GradCheckReport {
  std::string op_name;
  double max_rel_err = 0.0;
  std::size_t argmax_input = 0;
  std::size_t argmax_index = 0;  // flat index inside argmax_input
  double eps = 0.0;
  std::size_t probes = 0;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  /// Per-input cap on the number of probed coordinates; 0 probes every one.
  std::size_t max_probes = 0;
};

/// Compares analytic gradients of L = sum(op(inputs) * r), r a seeded
/// standard-normal cotangent, against central differences. The error per
/// coordinate is |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const DifferentiableOp& op, const std::vector<Tensor>& inputs,
                           double eps, const GradCheckOptions& options = {});

}  // namespace dopnet
