#include "dopnet/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "dopnet/ops.hpp"
#include "dopnet/sequence.hpp"

namespace dopnet {
namespace {

constexpr std::size_t kReferenceStride = 16;
// Input standardization: pixel values in [0,1] map to (x - 0.5) / 0.25.
constexpr double kPixelMean = 0.5;
constexpr double kPixelScale = 4.0;
// Init std multipliers over 1/sqrt(fan_in).
constexpr double kBackboneGain = 2.0;
constexpr double kSegGain = 3.0;

struct ParamSpec {
  std::string name;
  Shape shape;
  double stddev;  // 0 means constant fill
  double fill = 0.0;
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  const std::size_t C = cfg.channels, L = cfg.heads;
  const EquirectGrid ref = cfg.reference_grid();
  const Shape offsets{ref.height, ref.width, kStencilTaps, 2};
  const double inv_c = 1.0 / std::sqrt(static_cast<double>(C));
  const double head_bias = std::log(std::exp(1.0) - 1.0);  // softplus^-1(1)

  std::vector<ParamSpec> s;
  for (std::size_t l = 0; l < kNumScales; ++l) {
    const std::size_t in = l == 0 ? 3 : C;
    const std::string prefix = "backbone.conv" + std::to_string(l + 1);
    s.push_back({prefix + ".weight", {C, in, 3, 3}, kBackboneGain / std::sqrt(9.0 * in)});
    s.push_back({prefix + ".bias", {C}, 0.0});
  }
  s.push_back({"csda.offsets", offsets, 0.0});
  s.push_back({"csda.attn.weight", {L * kAssembleTaps, C}, 0.1 * inv_c});
  s.push_back({"csda.attn.bias", {L * kAssembleTaps}, 0.0});
  s.push_back({"flip.weight", {C, C, 3, 3}, 1.0 / std::sqrt(9.0 * C)});
  s.push_back({"flip.bias", {C}, 0.0});
  s.push_back({"flip.offsets", offsets, 0.0});
  s.push_back({"seg.weight", {1, C, 3, 3}, kSegGain / std::sqrt(9.0 * C)});
  s.push_back({"seg.bias", {1}, 0.0});
  for (const char* b : {"h", "v"}) {
    s.push_back({std::string("graph.") + b + ".weight", {C, C}, inv_c});
  }
  for (const char* prefix : {"selfattn.h", "selfattn.v", "crossattn.hv", "crossattn.vh"}) {
    for (const char* m : {"q", "k", "v"}) {
      s.push_back({std::string(prefix) + ".w" + m, {C, C}, inv_c});
      s.push_back({std::string(prefix) + ".b" + m, {C}, 0.0});
    }
  }
  s.push_back({"head.depth.weight", {C}, inv_c});
  s.push_back({"head.depth.bias", {1}, 0.0, head_bias});
  s.push_back({"head.height.weight", {C}, inv_c});
  s.push_back({"head.height.bias", {1}, 0.0, head_bias});
  return s;
}

// Cotangent of x + f(x) given the cotangent of f's input contribution.
Tensor graph_residual_backward(const Tensor& q, ParamStore& p, const std::string& name,
                               const Tensor& gy) {
  GraphGrads g = channel_graph_attend_backward(q, p.value(name), gy);
  p.accumulate(name, g.weight);
  g.q += gy;
  return g.q;
}

void add_breakdown(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.total += w * b.total;
  acc.segment += w * b.segment;
  acc.layout_depth += w * b.layout_depth;
  acc.layout_height += w * b.layout_height;
  acc.layout_normal += w * b.layout_normal;
  acc.layout_gradient += w * b.layout_gradient;
}

LossBreakdown sample_loss(const ForwardCache& c, const Sample& s) {
  return total_loss(bce_segment(c.planes.logits, s.mask), layout_loss(c.pred, s.gt));
}

}  // namespace

void ModelConfig::validate() const {
  if (channels < 2) throw ValidationError("channels must be at least 2");
  if (heads == 0 || channels % heads != 0) {
    throw ValidationError("channels " + std::to_string(channels) + " not divisible by heads " +
                          std::to_string(heads));
  }
  if (width != 2 * height || height == 0 || height % 32 != 0) {
    throw ValidationError("input must be H x 2H with H divisible by 32, got " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
}

EquirectGrid ModelConfig::reference_grid() const {
  return EquirectGrid(height / kReferenceStride, width / kReferenceStride);
}

ParamStore init_params(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamStore p;
  for (const ParamSpec& s : param_specs(cfg)) {
    Tensor t(s.shape, s.fill);
    if (s.stddev > 0.0) {
      for (double& v : t.data()) v = s.stddev * normal(rng);
    }
    p.add(s.name, std::move(t));
  }
  return p;
}

void check_params(const ParamStore& p, const ModelConfig& cfg) {
  cfg.validate();
  for (const ParamSpec& s : param_specs(cfg)) {
    if (!p.contains(s.name)) throw ValidationError("weights: missing tensor " + s.name);
    require_shape(p.value(s.name), s.shape, s.name.c_str());
    require_finite(p.value(s.name), s.name.c_str());
  }
}

ForwardCache forward(const Tensor& image, const ParamStore& p, const ModelConfig& cfg) {
  require_shape(image, {3, cfg.height, cfg.width}, "image");
  ForwardCache c;
  c.image = image;
  for (double& v : c.image.data()) v = (v - kPixelMean) * kPixelScale;
  c.ms = backbone_stub(c.image, p);
  c.base_coords = tangent_grid(cfg.reference_grid());
  c.gathered = multiscale_gather(c.ms, c.base_coords, p.value("csda.offsets"));
  c.assembled = csda_attend(c.gathered, p, cfg.heads);
  c.fused = soft_flip_fuse(c.assembled, p);
  c.planes = disentangle(c.fused, c.assembled, p);
  c.seq = compress_vertical(c.planes.horizontal, c.planes.vertical);
  c.qh1 = add(c.seq.horizontal, channel_graph_attend(c.seq.horizontal, p.value("graph.h.weight")));
  c.qv1 = add(c.seq.vertical, channel_graph_attend(c.seq.vertical, p.value("graph.v.weight")));
  c.qh2 = self_attend(c.qh1, p, "selfattn.h");
  c.qv2 = self_attend(c.qv1, p, "selfattn.v");
  c.qh3 = cross_attend(c.qh2, c.qv2, p, "crossattn.hv");
  c.qv3 = cross_attend(c.qv2, c.qh2, p, "crossattn.vh");
  c.pred = heads(c.qv3, c.qh3, p);
  return c;
}

void backward(const ForwardCache& c, ParamStore& p, const ModelConfig& cfg,
              const Tensor& g_logits, const Tensor& g_depth, double g_height) {
  const HeadGrads gh = heads_backward(c.qv3, c.qh3, p, g_depth, g_height);

  const AttentionGrads ghv = cross_attend_backward(c.qh2, c.qv2, p, "crossattn.hv", gh.q_horizontal);
  const AttentionGrads gvh = cross_attend_backward(c.qv2, c.qh2, p, "crossattn.vh", gh.q_vertical);
  const Tensor g_qh2 = add(ghv.query_source, gvh.kv_source);
  const Tensor g_qv2 = add(gvh.query_source, ghv.kv_source);

  const Tensor g_qh1 = self_attend_backward(c.qh1, p, "selfattn.h", g_qh2);
  const Tensor g_qv1 = self_attend_backward(c.qv1, p, "selfattn.v", g_qv2);

  const Tensor g_seq_h = graph_residual_backward(c.seq.horizontal, p, "graph.h.weight", g_qh1);
  const Tensor g_seq_v = graph_residual_backward(c.seq.vertical, p, "graph.v.weight", g_qv1);

  const Shape& map_shape = c.planes.horizontal.shape();
  const DisentangleGrads gd = disentangle_backward(
      c.fused, c.assembled, p, compress_vertical_backward(map_shape, g_seq_h),
      compress_vertical_backward(map_shape, g_seq_v), g_logits);

  Tensor g_assembled = gd.assembled;
  g_assembled += soft_flip_fuse_backward(c.assembled, p, gd.fused);

  const Tensor g_gathered = csda_attend_backward(c.gathered, p, cfg.heads, g_assembled);
  MultiscaleGatherGrads gm =
      multiscale_gather_backward(c.ms, c.base_coords, p.value("csda.offsets"), g_gathered);
  p.accumulate("csda.offsets", gm.offsets);

  BackboneGrads gb;
  gb.scales = std::move(gm.scales);
  backbone_stub_backward(c.image, p, gb);
}

LossBreakdown batch_loss(std::span<const Sample> batch, const ParamStore& p,
                         const ModelConfig& cfg) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  LossBreakdown acc = total_loss(0.0, {});
  for (const Sample& s : batch) add_breakdown(acc, sample_loss(forward(s.image, p, cfg), s), w);
  return acc;
}

LossBreakdown batch_loss_and_grad(std::span<const Sample> batch, ParamStore& p,
                                  const ModelConfig& cfg) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  LossBreakdown acc = total_loss(0.0, {});
  for (const Sample& s : batch) {
    const ForwardCache c = forward(s.image, p, cfg);
    add_breakdown(acc, sample_loss(c, s), w);
    const Tensor g_logits = scale(bce_segment_backward(c.planes.logits, s.mask), w * kSegmentLambda);
    const LayoutLossGrads gl = layout_loss_backward(c.pred, s.gt);
    backward(c, p, cfg, g_logits, scale(gl.depth, w), w * gl.height);
  }
  return acc;
}

Adam::Adam(const ParamStore& p, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw ValidationError("learning rate must be finite and non-negative");
  }
  for (const auto& e : p.entries()) {
    m_.push_back(Tensor::zeros_like(e.value));
    v_.push_back(Tensor::zeros_like(e.value));
  }
}

void Adam::step(ParamStore& p) {
  auto& entries = p.entries();
  if (entries.size() != m_.size()) throw ValidationError("Adam: parameter set changed");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor& x = entries[i].value;
    const Tensor& g = entries[i].grad;
    for (std::size_t k = 0; k < x.size(); ++k) {
      m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g[k];
      v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      x[k] -= cfg_.lr * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + cfg_.eps);
    }
  }
}

}  // namespace dopnet
