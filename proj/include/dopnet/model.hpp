#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dopnet/blocks.hpp"
#include "dopnet/layout.hpp"
#include "dopnet/losses.hpp"
#include "dopnet/param_store.hpp"
#include "dopnet/sphere.hpp"
#include "dopnet/tensor.hpp"

namespace dopnet {

struct ModelConfig {
  std::size_t channels = 8;
  std::size_t heads = 2;
  std::size_t height = 256;  // input panorama rows
  std::size_t width = 512;
  std::uint64_t seed = 0;

  /// Throws ValidationError on inconsistent settings.
  void validate() const;
  /// Grid of the reference scale, H/16 x W/16.
  EquirectGrid reference_grid() const;
};

/// Seeded initial weights. Sampling offsets start at zero.
ParamStore init_params(const ModelConfig& cfg);

/// Throws ValidationError if any expected weight is missing or misshaped.
void check_params(const ParamStore& p, const ModelConfig& cfg);

/// Every intermediate of one forward pass, kept for the backward pass.
struct ForwardCache {
  Tensor image;  // standardized, (x - 0.5) / 0.25
  MultiScaleFeatures ms;
  Tensor base_coords;  // tangent grid of the reference scale
  Tensor gathered;     // [C,Hs,Ws,9,4]
  Tensor assembled;    // f'
  Tensor fused;        // soft-flip output
  Disentangled planes;
  PlaneSequences seq;  // after compression
  Tensor qh1, qv1;     // after channel graph (with residual)
  Tensor qh2, qv2;     // after self-attention
  Tensor qh3, qv3;     // after cross-attention
  Prediction pred;
};

ForwardCache forward(const Tensor& image, const ParamStore& p, const ModelConfig& cfg);

/// Accumulates weight gradients for cotangents of the segmentation logits,
/// the depth sequence and the height.
void backward(const ForwardCache& c, ParamStore& p, const ModelConfig& cfg,
              const Tensor& g_logits, const Tensor& g_depth, double g_height);

/// One training example at network resolution.
struct Sample {
  Tensor image;      // [3,H,W]
  PlaneMask mask;    // reference-scale plane mask
  HorizonDepth gt;   // full-width ground truth
};

/// Mean loss over the batch, forward only.
LossBreakdown batch_loss(std::span<const Sample> batch, const ParamStore& p,
                         const ModelConfig& cfg);
/// Same value; also accumulates the gradient of the mean total into p.
LossBreakdown batch_loss_and_grad(std::span<const Sample> batch, ParamStore& p,
                                  const ModelConfig& cfg);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const ParamStore& p, AdamConfig cfg);
  /// Applies one bias-corrected update from the accumulated gradients.
  void step(ParamStore& p);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace dopnet
