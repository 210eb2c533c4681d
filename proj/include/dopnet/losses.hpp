#pragma once

#include "dopnet/layout.hpp"
#include "dopnet/tensor.hpp"

namespace dopnet {

/// Weight of the segmentation term in the combined objective.
inline constexpr double kSegmentLambda = 0.75;

struct LossBreakdown {
  double total = 0.0;
  double segment = 0.0;
  double layout_depth = 0.0;
  double layout_height = 0.0;
  double layout_normal = 0.0;
  double layout_gradient = 0.0;
  double lambda = kSegmentLambda;

  double layout() const { return layout_depth + layout_height + layout_normal + layout_gradient; }
};

/// Mean binary cross-entropy between logits [H,W] and the plane mask,
/// evaluated as max(x,0) - x*y + log1p(exp(-|x|)).
double bce_segment(const Tensor& logits, const PlaneMask& gt);
Tensor bce_segment_backward(const Tensor& logits, const PlaneMask& gt);

struct LayoutLossTerms {
  double depth = 0.0;     // mean |d_pred - d_gt|
  double height = 0.0;    // |h_pred - h_gt|
  double normal = 0.0;    // mean |wrap(n_pred - n_gt)|
  double gradient = 0.0;  // mean |g_pred - g_gt|
};

/// Per-term multipliers applied in layout_loss_backward.
struct LayoutTermWeights {
  double depth = 1.0;
  double height = 1.0;
  double normal = 1.0;
  double gradient = 1.0;
};

/// Ground truth is linearly resampled to the prediction width first.
LayoutLossTerms layout_loss(const Prediction& pred, const HorizonDepth& gt);

struct LayoutLossGrads {
  Tensor depth;
  double height = 0.0;
};
LayoutLossGrads layout_loss_backward(const Prediction& pred, const HorizonDepth& gt,
                                     const LayoutTermWeights& weights = {});

/// total = lambda * segment + (depth + height + normal + gradient).
LossBreakdown total_loss(double segment, const LayoutLossTerms& layout);

}  // namespace dopnet
