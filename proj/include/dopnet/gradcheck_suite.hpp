#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dopnet/grad_check.hpp"

namespace dopnet {

/// Pass threshold on max_rel_err.
inline constexpr double kGradTolerance = 1e-3;
inline constexpr double kGradEps = 1e-4;

/// A registered operation with seeded toy inputs (C=8, reference grid 16x32).
/// Sampling coordinates are kept away from bilinear cell edges so central
/// differences never straddle a kink.
struct GradCheckCase {
  DifferentiableOp op;
  std::vector<Tensor> inputs;
  std::size_t max_probes = 0;  // 0 probes every coordinate
};

std::vector<std::string> gradcheck_names();

/// Builds every case whose name contains `filter` (empty = all).
std::vector<GradCheckCase> gradcheck_cases(const std::string& filter, std::uint64_t seed);

/// Runs the selected cases. Throws ValidationError if nothing matches.
std::vector<GradCheckReport> run_gradcheck_suite(const std::string& filter, double eps,
                                                 std::uint64_t seed);

}  // namespace dopnet
