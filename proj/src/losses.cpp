#include "dopnet/losses.hpp"

#include <cmath>

#include "dopnet/ops.hpp"

namespace dopnet {
namespace {

double sign(double v) { return (v > 0) - (v < 0); }

Tensor gt_at_width(const HorizonDepth& gt, std::size_t width) {
  if (gt.depth.size() == width) return gt.depth;
  return resample_columns(gt.depth, width);
}

void check_logits(const Tensor& logits, const PlaneMask& gt) {
  if (!logits.same_shape(gt.mask)) {
    throw ValidationError("bce_segment: logits " + shape_str(logits.shape()) + " vs mask " +
                          shape_str(gt.mask.shape()));
  }
}

}  // namespace

double bce_segment(const Tensor& logits, const PlaneMask& gt) {
  check_logits(logits, gt);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i], y = gt.mask[i];
    s += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  return s / static_cast<double>(logits.size());
}

Tensor bce_segment_backward(const Tensor& logits, const PlaneMask& gt) {
  check_logits(logits, gt);
  Tensor g(logits.shape());
  const double inv = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) g[i] = (sigmoid(logits[i]) - gt.mask[i]) * inv;
  return g;
}

LayoutLossTerms layout_loss(const Prediction& pred, const HorizonDepth& gt) {
  const std::size_t W = pred.horizon_depth.size();
  const Tensor gd = gt_at_width(gt, W);
  const NormalsGradients pn = depth_normals_gradients(pred.horizon_depth);
  const NormalsGradients gn = depth_normals_gradients(gd);
  LayoutLossTerms t;
  for (std::size_t j = 0; j < W; ++j) {
    t.depth += std::abs(pred.horizon_depth[j] - gd[j]);
    t.normal += std::abs(wrap_angle(pn.normals[j] - gn.normals[j]));
    t.gradient += std::abs(pn.gradients[j] - gn.gradients[j]);
  }
  const double inv = 1.0 / static_cast<double>(W);
  t.depth *= inv;
  t.normal *= inv;
  t.gradient *= inv;
  t.height = std::abs(pred.room_height_m - gt.room_height_m);
  return t;
}

LayoutLossGrads layout_loss_backward(const Prediction& pred, const HorizonDepth& gt,
                                     const LayoutTermWeights& weights) {
  const std::size_t W = pred.horizon_depth.size();
  const Tensor gd = gt_at_width(gt, W);
  const NormalsGradients pn = depth_normals_gradients(pred.horizon_depth);
  const NormalsGradients gn = depth_normals_gradients(gd);
  const double inv = 1.0 / static_cast<double>(W);

  Tensor g_normals({W}), g_gradients({W});
  LayoutLossGrads g{Tensor({W}), 0.0};
  for (std::size_t j = 0; j < W; ++j) {
    g.depth[j] = weights.depth * inv * sign(pred.horizon_depth[j] - gd[j]);
    g_normals[j] = weights.normal * inv * sign(wrap_angle(pn.normals[j] - gn.normals[j]));
    g_gradients[j] = weights.gradient * inv * sign(pn.gradients[j] - gn.gradients[j]);
  }
  g.depth += depth_normals_gradients_backward(pred.horizon_depth, g_normals, g_gradients);
  g.height = weights.height * sign(pred.room_height_m - gt.room_height_m);
  return g;
}

LossBreakdown total_loss(double segment, const LayoutLossTerms& layout) {
  LossBreakdown b;
  b.segment = segment;
  b.layout_depth = layout.depth;
  b.layout_height = layout.height;
  b.layout_normal = layout.normal;
  b.layout_gradient = layout.gradient;
  b.total = b.lambda * segment + b.layout();
  return b;
}

}  // namespace dopnet
