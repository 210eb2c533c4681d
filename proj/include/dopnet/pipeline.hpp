#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "dopnet/model.hpp"
#include "dopnet/scene.hpp"

namespace dopnet {

inline constexpr std::size_t kMaxBatch = 4;

struct TrainConfig {
  std::size_t steps = 500;
  double lr = 1e-4;
  std::size_t channels = 8;
  std::size_t heads = 2;
  std::uint64_t seed = 0;

  void validate() const;
  /// Network configuration for H x W inputs.
  ModelConfig model(std::size_t height, std::size_t width) const;
};

/// Loads one generated room. The image must be height x width; the plane
/// mask is rasterized at the reference scale of that input size.
Sample load_sample(const RoomFiles& files, std::size_t height, std::size_t width);
/// All rooms of a generated directory. Every image must match the first.
std::vector<Sample> load_samples(const std::filesystem::path& dir);

struct TrainResult {
  ParamStore params;
  /// Losses at steps 0..steps; entry k is measured before update k, the
  /// last entry after the final update.
  std::vector<LossBreakdown> trace;
};

using StepCallback = std::function<void(std::size_t step, const LossBreakdown&)>;

/// Adam on the mean batch loss from seeded initial weights. Batches hold up
/// to kMaxBatch rooms taken cyclically. Throws NumericalError naming the
/// step if the loss is not finite.
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

/// Network shape implied by a weight file for an H x W input.
ModelConfig config_from_params(const ParamStore& p, std::size_t height, std::size_t width);

Prediction infer(const ParamStore& p, const Tensor& image);

}  // namespace dopnet
