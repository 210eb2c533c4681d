#include "dopnet/blocks.hpp"

#include <cmath>
#include <string>

#include "dopnet/ops.hpp"
#include "dopnet/sphere.hpp"

namespace dopnet {
namespace {

std::string conv_name(std::size_t layer, const char* field) {
  return "backbone.conv" + std::to_string(layer + 1) + "." + field;
}

struct BackboneActs {
  Tensor pooled;
  std::array<Tensor, kNumScales> out;
};

BackboneActs backbone_acts(const Tensor& image, const ParamStore& p) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ValidationError("backbone: image must be [3,H,W], got " + shape_str(image.shape()));
  }
  const std::size_t H = image.dim(1), W = image.dim(2);
  if (W != 2 * H || H % 32 != 0 || H == 0) {
    throw ValidationError("backbone: image must be H x 2H with H divisible by 32, got " +
                          std::to_string(H) + "x" + std::to_string(W));
  }
  BackboneActs a;
  a.pooled = avg_pool2(image);
  const Tensor* x = &a.pooled;
  for (std::size_t l = 0; l < kNumScales; ++l) {
    a.out[l] = conv3x3(*x, p.value(conv_name(l, "weight")), p.value(conv_name(l, "bias")), 2);
    x = &a.out[l];
  }
  return a;
}

Tensor flatten_coords(const Tensor& base_coords, const Tensor& offsets) {
  if (!base_coords.same_shape(offsets) || base_coords.ndim() != 4 ||
      base_coords.dim(2) != kStencilTaps || base_coords.dim(3) != 2) {
    throw ValidationError("gather: coords/offsets must both be [H,W,9,2], got " +
                          shape_str(base_coords.shape()) + " and " + shape_str(offsets.shape()));
  }
  Tensor c = add(base_coords, offsets);
  return c.reshaped({c.size() / 2, 2});
}

void check_grid_matches(const Tensor& f, const Tensor& base_coords) {
  if (f.ndim() != 3 || base_coords.ndim() != 4 || base_coords.dim(0) != f.dim(1) ||
      base_coords.dim(1) != f.dim(2)) {
    throw ValidationError("gather: grid " + shape_str(base_coords.shape()) +
                          " does not match feature map " + shape_str(f.shape()));
  }
}

// Regular 3x3 stencil around every pixel, [H,W,9,2].
Tensor regular_stencil(std::size_t H, std::size_t W) {
  Tensor c({H, W, kStencilTaps, 2});
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t k = 0; k < kStencilTaps; ++k) {
        const std::size_t b = ((y * W + x) * kStencilTaps + k) * 2;
        c[b] = static_cast<double>(y) + static_cast<double>(k / 3) - 1.0;
        c[b + 1] = static_cast<double>(x) + static_cast<double>(k % 3) - 1.0;
      }
    }
  }
  return c;
}

struct CsdaDims {
  std::size_t C, P, L, Cl;
};

CsdaDims csda_dims(const Tensor& g, const ParamStore& p, std::size_t heads) {
  if (g.ndim() != 5 || g.dim(3) != kStencilTaps || g.dim(4) != kNumScales) {
    throw ValidationError("csda: input must be [C,H,W,9,4], got " + shape_str(g.shape()));
  }
  const std::size_t C = g.dim(0);
  if (heads == 0 || C % heads != 0) {
    throw ValidationError("csda: channels " + std::to_string(C) + " not divisible by heads " +
                          std::to_string(heads));
  }
  require_shape(p.value("csda.attn.weight"), {heads * kAssembleTaps, C}, "csda.attn.weight");
  require_shape(p.value("csda.attn.bias"), {heads * kAssembleTaps}, "csda.attn.bias");
  return {C, g.dim(1) * g.dim(2), heads, C / heads};
}

constexpr std::size_t kCenterSample = assemble_index(kCenterTap, kReferenceScale);

// Attention weights at one position, [L*36].
void csda_weights_at(const Tensor& g, const ParamStore& p, const CsdaDims& d, std::size_t q,
                     double* out) {
  const Tensor& w = p.value("csda.attn.weight");
  const Tensor& b = p.value("csda.attn.bias");
  const std::size_t LT = d.L * kAssembleTaps;
  for (std::size_t lt = 0; lt < LT; ++lt) {
    double s = b[lt];
    for (std::size_t c = 0; c < d.C; ++c) {
      s += w[lt * d.C + c] * g[(c * d.P + q) * kAssembleTaps + kCenterSample];
    }
    out[lt] = s;
  }
  for (std::size_t l = 0; l < d.L; ++l) {
    double* a = out + l * kAssembleTaps;
    double m = a[0];
    for (std::size_t t = 1; t < kAssembleTaps; ++t) m = std::max(m, a[t]);
    double z = 0.0;
    for (std::size_t t = 0; t < kAssembleTaps; ++t) {
      a[t] = std::exp(a[t] - m);
      z += a[t];
    }
    for (std::size_t t = 0; t < kAssembleTaps; ++t) a[t] /= z;
  }
}

// Deformable-conv samples of the flipped map: [C, H*W*9].
Tensor flip_samples(const Tensor& flipped, const Tensor& offsets) {
  const Tensor base = regular_stencil(flipped.dim(1), flipped.dim(2));
  return bilinear_sample(flipped, flatten_coords(base, offsets));
}

}  // namespace

MultiScaleFeatures backbone_stub(const Tensor& image, const ParamStore& p) {
  BackboneActs a = backbone_acts(image, p);
  return {std::move(a.out)};
}

Tensor backbone_stub_backward(const Tensor& image, ParamStore& p, const BackboneGrads& g) {
  const BackboneActs a = backbone_acts(image, p);
  Tensor carry;
  for (std::size_t l = kNumScales; l-- > 0;) {
    Tensor gy = g.scales[l].empty() ? Tensor(a.out[l].shape()) : g.scales[l];
    if (!carry.empty()) gy += carry;
    const Tensor& x = l == 0 ? a.pooled : a.out[l - 1];
    ConvGrads cg = conv3x3_backward(x, p.value(conv_name(l, "weight")), 2, gy);
    p.accumulate(conv_name(l, "weight"), cg.weight);
    p.accumulate(conv_name(l, "bias"), cg.bias);
    carry = std::move(cg.input);
  }
  return avg_pool2_backward(image.shape(), carry);
}

Tensor distortion_gather(const Tensor& f, const Tensor& base_coords, const Tensor& offsets) {
  check_grid_matches(f, base_coords);
  const Tensor s = bilinear_sample(f, flatten_coords(base_coords, offsets));
  return s.reshaped({f.dim(0), f.dim(1), f.dim(2), kStencilTaps});
}

GatherGrads distortion_gather_backward(const Tensor& f, const Tensor& base_coords,
                                       const Tensor& offsets, const Tensor& gy) {
  check_grid_matches(f, base_coords);
  const std::size_t N = f.dim(1) * f.dim(2) * kStencilTaps;
  require_shape(gy, {f.dim(0), f.dim(1), f.dim(2), kStencilTaps}, "distortion_gather cotangent");
  SampleGrads sg =
      bilinear_sample_backward(f, flatten_coords(base_coords, offsets), gy.reshaped({f.dim(0), N}));
  return {std::move(sg.feature), sg.coords.reshaped(offsets.shape())};
}

Tensor multiscale_gather(const MultiScaleFeatures& ms, const Tensor& base_coords,
                         const Tensor& offsets) {
  const std::size_t Hs = base_coords.dim(0), Ws = base_coords.dim(1);
  const std::size_t C = ms.scales[0].dim(0);
  Tensor out({C, Hs, Ws, kStencilTaps, kNumScales});
  for (std::size_t s = 0; s < kNumScales; ++s) {
    if (ms.scales[s].ndim() != 3 || ms.scales[s].dim(0) != C) {
      throw ValidationError("multiscale_gather: scales must share channel count");
    }
    const Tensor r = resize_bilinear(ms.scales[s], Hs, Ws);
    const Tensor g = distortion_gather(r, base_coords, offsets);
    for (std::size_t i = 0; i < g.size(); ++i) out[i * kNumScales + s] = g[i];
  }
  return out;
}

MultiscaleGatherGrads multiscale_gather_backward(const MultiScaleFeatures& ms,
                                                 const Tensor& base_coords,
                                                 const Tensor& offsets, const Tensor& gy) {
  const std::size_t Hs = base_coords.dim(0), Ws = base_coords.dim(1);
  const std::size_t C = ms.scales[0].dim(0);
  require_shape(gy, {C, Hs, Ws, kStencilTaps, kNumScales}, "multiscale_gather cotangent");
  MultiscaleGatherGrads out;
  out.offsets = Tensor(offsets.shape());
  for (std::size_t s = 0; s < kNumScales; ++s) {
    const Tensor r = resize_bilinear(ms.scales[s], Hs, Ws);
    Tensor gs({C, Hs, Ws, kStencilTaps});
    for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = gy[i * kNumScales + s];
    GatherGrads g = distortion_gather_backward(r, base_coords, offsets, gs);
    out.offsets += g.offsets;
    out.scales[s] = resize_bilinear_backward(ms.scales[s], Hs, Ws, g.feature);
  }
  return out;
}

Tensor csda_attention_weights(const Tensor& gathered, const ParamStore& p, std::size_t heads) {
  const CsdaDims d = csda_dims(gathered, p, heads);
  Tensor a({d.P, d.L, kAssembleTaps});
  for (std::size_t q = 0; q < d.P; ++q) {
    csda_weights_at(gathered, p, d, q, a.ptr() + q * d.L * kAssembleTaps);
  }
  return a;
}

Tensor csda_attend(const Tensor& gathered, const ParamStore& p, std::size_t heads) {
  const CsdaDims d = csda_dims(gathered, p, heads);
  Tensor out({d.C, gathered.dim(1), gathered.dim(2)});
  std::vector<double> a(d.L * kAssembleTaps);
  for (std::size_t q = 0; q < d.P; ++q) {
    csda_weights_at(gathered, p, d, q, a.data());
    for (std::size_t c = 0; c < d.C; ++c) {
      const double* w = a.data() + (c / d.Cl) * kAssembleTaps;
      const double* x = gathered.ptr() + (c * d.P + q) * kAssembleTaps;
      double s = 0.0;
      for (std::size_t t = 0; t < kAssembleTaps; ++t) s += w[t] * x[t];
      out[c * d.P + q] = s;
    }
  }
  return out;
}

Tensor csda_attend_backward(const Tensor& gathered, ParamStore& p, std::size_t heads,
                            const Tensor& gy) {
  const CsdaDims d = csda_dims(gathered, p, heads);
  require_shape(gy, {d.C, gathered.dim(1), gathered.dim(2)}, "csda cotangent");
  const Tensor& w = p.value("csda.attn.weight");
  Tensor gx(gathered.shape());
  Tensor gw(w.shape());
  Tensor gb({d.L * kAssembleTaps});
  std::vector<double> a(d.L * kAssembleTaps), ga(d.L * kAssembleTaps);
  for (std::size_t q = 0; q < d.P; ++q) {
    csda_weights_at(gathered, p, d, q, a.data());
    std::fill(ga.begin(), ga.end(), 0.0);
    for (std::size_t c = 0; c < d.C; ++c) {
      const std::size_t l = c / d.Cl;
      const double g = gy[c * d.P + q];
      const double* x = gathered.ptr() + (c * d.P + q) * kAssembleTaps;
      double* gxp = gx.ptr() + (c * d.P + q) * kAssembleTaps;
      for (std::size_t t = 0; t < kAssembleTaps; ++t) {
        ga[l * kAssembleTaps + t] += g * x[t];
        gxp[t] += g * a[l * kAssembleTaps + t];
      }
    }
    // softmax backward per head -> logit cotangents, stored back into ga
    for (std::size_t l = 0; l < d.L; ++l) {
      double dotp = 0.0;
      for (std::size_t t = 0; t < kAssembleTaps; ++t) {
        dotp += a[l * kAssembleTaps + t] * ga[l * kAssembleTaps + t];
      }
      for (std::size_t t = 0; t < kAssembleTaps; ++t) {
        const std::size_t i = l * kAssembleTaps + t;
        ga[i] = a[i] * (ga[i] - dotp);
      }
    }
    for (std::size_t lt = 0; lt < d.L * kAssembleTaps; ++lt) {
      gb[lt] += ga[lt];
      for (std::size_t c = 0; c < d.C; ++c) {
        const std::size_t ci = (c * d.P + q) * kAssembleTaps + kCenterSample;
        gw[lt * d.C + c] += ga[lt] * gathered[ci];
        gx[ci] += ga[lt] * w[lt * d.C + c];
      }
    }
  }
  p.accumulate("csda.attn.weight", gw);
  p.accumulate("csda.attn.bias", gb);
  return gx;
}

Tensor soft_flip_fuse(const Tensor& f, const ParamStore& p) {
  if (f.ndim() != 3) throw ValidationError("soft_flip_fuse: expected [C,H,W]");
  const std::size_t C = f.dim(0), H = f.dim(1), W = f.dim(2), P = H * W;
  const Tensor& w = p.value("flip.weight");
  const Tensor& b = p.value("flip.bias");
  require_shape(w, {C, C, 3, 3}, "flip.weight");
  require_shape(b, {C}, "flip.bias");
  require_shape(p.value("flip.offsets"), {H, W, kStencilTaps, 2}, "flip.offsets");

  const Tensor s = flip_samples(flip_vertical(f), p.value("flip.offsets"));
  Tensor out({C, H, W});
  for (std::size_t o = 0; o < C; ++o) {
    for (std::size_t q = 0; q < P; ++q) {
      double acc = b[o];
      for (std::size_t i = 0; i < C; ++i) {
        const double* sp = s.ptr() + i * P * kStencilTaps + q * kStencilTaps;
        const double* wp = w.ptr() + (o * C + i) * kStencilTaps;
        for (std::size_t k = 0; k < kStencilTaps; ++k) acc += wp[k] * sp[k];
      }
      out[o * P + q] = 0.5 * (f[o * P + q] + acc);
    }
  }
  return out;
}

Tensor soft_flip_fuse_backward(const Tensor& f, ParamStore& p, const Tensor& gy) {
  const std::size_t C = f.dim(0), H = f.dim(1), W = f.dim(2), P = H * W;
  require_shape(gy, f.shape(), "soft_flip_fuse cotangent");
  const Tensor& w = p.value("flip.weight");
  const Tensor& offsets = p.value("flip.offsets");
  const Tensor flipped = flip_vertical(f);
  const Tensor s = flip_samples(flipped, offsets);

  Tensor gw(w.shape()), gb({C}), gs(s.shape());
  for (std::size_t o = 0; o < C; ++o) {
    for (std::size_t q = 0; q < P; ++q) {
      const double g = 0.5 * gy[o * P + q];
      if (g == 0.0) continue;
      gb[o] += g;
      for (std::size_t i = 0; i < C; ++i) {
        const std::size_t sb = i * P * kStencilTaps + q * kStencilTaps;
        const std::size_t wb = (o * C + i) * kStencilTaps;
        for (std::size_t k = 0; k < kStencilTaps; ++k) {
          gw[wb + k] += g * s[sb + k];
          gs[sb + k] += g * w[wb + k];
        }
      }
    }
  }
  const Tensor base = regular_stencil(H, W);
  SampleGrads sg = bilinear_sample_backward(flipped, flatten_coords(base, offsets), gs);
  p.accumulate("flip.weight", gw);
  p.accumulate("flip.bias", gb);
  p.accumulate("flip.offsets", sg.coords.reshaped(offsets.shape()));

  Tensor gf = flip_vertical(sg.feature);
  for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += 0.5 * gy[i];
  return gf;
}

Disentangled disentangle(const Tensor& fused, const Tensor& assembled, const ParamStore& p) {
  if (!fused.same_shape(assembled) || fused.ndim() != 3) {
    throw ValidationError("disentangle: fused " + shape_str(fused.shape()) + " vs assembled " +
                          shape_str(assembled.shape()));
  }
  const std::size_t C = fused.dim(0), H = fused.dim(1), W = fused.dim(2), P = H * W;
  const Tensor base = add(fused, assembled);
  Tensor logits =
      conv3x3(base, p.value("seg.weight"), p.value("seg.bias"), 1).reshaped({H, W});
  Disentangled d{Tensor(base.shape()), Tensor(base.shape()), std::move(logits)};
  for (std::size_t q = 0; q < P; ++q) {
    const double m = sigmoid(d.logits[q]);
    for (std::size_t c = 0; c < C; ++c) {
      d.horizontal[c * P + q] = base[c * P + q] * m;
      d.vertical[c * P + q] = base[c * P + q] * (1.0 - m);
    }
  }
  return d;
}

DisentangleGrads disentangle_backward(const Tensor& fused, const Tensor& assembled,
                                      ParamStore& p, const Tensor& g_horizontal,
                                      const Tensor& g_vertical, const Tensor& g_logits) {
  const std::size_t C = fused.dim(0), H = fused.dim(1), W = fused.dim(2), P = H * W;
  const Tensor base = add(fused, assembled);
  const Tensor logits = conv3x3(base, p.value("seg.weight"), p.value("seg.bias"), 1);
  Tensor gbase(base.shape());
  Tensor gs({1, H, W});
  for (std::size_t q = 0; q < P; ++q) {
    const double m = sigmoid(logits[q]);
    double gm = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double gh = g_horizontal.empty() ? 0.0 : g_horizontal[c * P + q];
      const double gv = g_vertical.empty() ? 0.0 : g_vertical[c * P + q];
      gbase[c * P + q] = gh * m + gv * (1.0 - m);
      gm += base[c * P + q] * (gh - gv);
    }
    gs[q] = gm * m * (1.0 - m) + (g_logits.empty() ? 0.0 : g_logits[q]);
  }
  ConvGrads cg = conv3x3_backward(base, p.value("seg.weight"), 1, gs);
  p.accumulate("seg.weight", cg.weight);
  p.accumulate("seg.bias", cg.bias);
  gbase += cg.input;
  return {gbase, gbase};
}

PlaneSequences compress_vertical(const Tensor& f_h, const Tensor& f_v) {
  if (!f_h.same_shape(f_v) || f_h.ndim() != 3) {
    throw ValidationError("compress_vertical: plane maps must share a [C,H,W] shape");
  }
  return {transpose(mean_axis(f_h, 1)), transpose(mean_axis(f_v, 1))};
}

Tensor compress_vertical_backward(const Shape& map_shape, const Tensor& g_seq) {
  return mean_axis_backward(map_shape, 1, transpose(g_seq));
}

}  // namespace dopnet
