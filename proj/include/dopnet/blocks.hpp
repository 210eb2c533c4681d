#pragma once

#include <array>
#include <cstddef>

#include "dopnet/param_store.hpp"
#include "dopnet/tensor.hpp"

// The 2D half of the network. Forward functions read weights from a
// ParamStore; backward functions take the same inputs, return input
// cotangents and accumulate weight gradients into the store.
//
// Parameter names:
//   backbone.conv{1..4}.{weight,bias}
//   csda.offsets [Hs,Ws,9,2], csda.attn.{weight [L*36,C], bias [L*36]}
//   flip.{weight [C,C,3,3], bias [C], offsets [Hs,Ws,9,2]}
//   seg.{weight [1,C,3,3], bias [1]}

namespace dopnet {

inline constexpr std::size_t kNumScales = 4;
/// Zero-based index of the reference scale (the third scale).
inline constexpr std::size_t kReferenceScale = 2;
/// Gathered samples per position: 9 taps x 4 scales.
inline constexpr std::size_t kAssembleTaps = 36;

/// Scale s (0-based) has shape [C, H / 2^(s+2), W / 2^(s+2)].
struct MultiScaleFeatures {
  std::array<Tensor, kNumScales> scales;
};

struct BackboneGrads {
  std::array<Tensor, kNumScales> scales;
};

/// 2x2 average-pool stem followed by four stride-2 circular-padded 3x3
/// convolutions without activation; each convolution emits one scale.
MultiScaleFeatures backbone_stub(const Tensor& image, const ParamStore& p);
/// Returns the image cotangent.
Tensor backbone_stub_backward(const Tensor& image, ParamStore& p, const BackboneGrads& g);

/// Offset-shifted gather: f[C,H,W] sampled at base + offsets ([H,W,9,2]) -> [C,H,W,9].
Tensor distortion_gather(const Tensor& f, const Tensor& base_coords, const Tensor& offsets);

struct GatherGrads {
  Tensor feature;
  Tensor offsets;
};
GatherGrads distortion_gather_backward(const Tensor& f, const Tensor& base_coords,
                                       const Tensor& offsets, const Tensor& gy);

/// Every scale resized to the reference grid, then gathered with the shared
/// reference-scale coordinates. Result [C,Hs,Ws,9,4], scale index last.
Tensor multiscale_gather(const MultiScaleFeatures& ms, const Tensor& base_coords,
                         const Tensor& offsets);

struct MultiscaleGatherGrads {
  std::array<Tensor, kNumScales> scales;
  Tensor offsets;
};
MultiscaleGatherGrads multiscale_gather_backward(const MultiScaleFeatures& ms,
                                                 const Tensor& base_coords,
                                                 const Tensor& offsets, const Tensor& gy);

/// Flat index of (tap, scale) within the 36 gathered samples.
constexpr std::size_t assemble_index(std::size_t tap, std::size_t scale) {
  return tap * kNumScales + scale;
}

/// Per-position multi-head attention over the 36 gathered samples
/// (cross-scale distortion-aware assembling). Logits come from a linear map
/// of the center tap at the reference scale; channel block l of C/L
/// channels is mixed with head l's weights. [C,Hs,Ws,9,4] -> [C,Hs,Ws].
Tensor csda_attend(const Tensor& gathered, const ParamStore& p, std::size_t heads);
/// Attention weights [Hs*Ws, L, 36]; every 36-way slice sums to 1.
Tensor csda_attention_weights(const Tensor& gathered, const ParamStore& p, std::size_t heads);
Tensor csda_attend_backward(const Tensor& gathered, ParamStore& p, std::size_t heads,
                            const Tensor& gy);

/// f_u = (f + deform3x3(flip_vertical(f))) / 2, where the deformable
/// convolution samples a regular 3x3 stencil shifted by flip.offsets.
Tensor soft_flip_fuse(const Tensor& f, const ParamStore& p);
Tensor soft_flip_fuse_backward(const Tensor& f, ParamStore& p, const Tensor& gy);

struct Disentangled {
  Tensor horizontal;  // f_h^p [C,H,W]
  Tensor vertical;    // f_v^p [C,H,W]
  Tensor logits;      // S [H,W]
};

/// base = f_u + f'; S = seg conv(base); f_h = base*sigmoid(S),
/// f_v = base*(1 - sigmoid(S)).
Disentangled disentangle(const Tensor& fused, const Tensor& assembled, const ParamStore& p);

struct DisentangleGrads {
  Tensor fused;
  Tensor assembled;
};
DisentangleGrads disentangle_backward(const Tensor& fused, const Tensor& assembled,
                                      ParamStore& p, const Tensor& g_horizontal,
                                      const Tensor& g_vertical, const Tensor& g_logits);

struct PlaneSequences {
  Tensor horizontal;  // Q_h [W,C]
  Tensor vertical;    // Q_v [W,C]
};

/// Mean over rows, transposed to [W,C].
PlaneSequences compress_vertical(const Tensor& f_h, const Tensor& f_v);
/// Cotangent of a single [C,H,W] map from its [W,C] sequence cotangent.
Tensor compress_vertical_backward(const Shape& map_shape, const Tensor& g_seq);

}  // namespace dopnet
