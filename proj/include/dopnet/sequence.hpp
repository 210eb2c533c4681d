#pragma once

#include <cstddef>
#include <string>

#include "dopnet/layout.hpp"
#include "dopnet/param_store.hpp"
#include "dopnet/tensor.hpp"

// The 1D half of the network. Sequences are [W,C] (position-major).
//
// Parameter names:
//   graph.{h,v}.weight [C,C]
//   selfattn.{h,v}.{wq,wk,wv} [C,C], .{bq,bk,bv} [C]
//   crossattn.{hv,vh}.* (same layout as selfattn)
//   head.depth.{weight [C], bias [1]}, head.height.{weight [C], bias [1]}

namespace dopnet {

/// Channel adjacency: A row-stochastic with zero diagonal; L = I - A.
struct ChannelGraph {
  Tensor adjacency;  // [C,C]
  Tensor laplacian;  // [C,C]
};

/// A[c,d] = softmax over d != c of the cosine similarity between channel
/// columns c and d of q. Zero-norm channels have similarity 0.
ChannelGraph channel_graph(const Tensor& q);

/// ((I - A) q^T)^T W: every channel minus the attention-weighted mix of the
/// other channels, then mixed by W [C,C]. No bias, no residual.
Tensor channel_graph_attend(const Tensor& q, const Tensor& weight);

struct GraphGrads {
  Tensor q;
  Tensor weight;
};
GraphGrads channel_graph_attend_backward(const Tensor& q, const Tensor& weight, const Tensor& gy);

/// Single-head scaled dot-product attention without residual:
/// softmax((xq Wq + bq)(xkv Wk + bk)^T / sqrt(C)) (xkv Wv + bv).
/// Weights are read from `<prefix>.{wq,bq,wk,bk,wv,bv}`.
Tensor attention(const Tensor& xq, const Tensor& xkv, const ParamStore& p,
                 const std::string& prefix);
/// Row-stochastic attention matrix [Wq, Wkv] of the call above.
Tensor attention_weights(const Tensor& xq, const Tensor& xkv, const ParamStore& p,
                         const std::string& prefix);

struct AttentionGrads {
  Tensor query_source;
  Tensor kv_source;
};
AttentionGrads attention_backward(const Tensor& xq, const Tensor& xkv, ParamStore& p,
                                  const std::string& prefix, const Tensor& gy);

/// x + attention(x, x).
Tensor self_attend(const Tensor& x, const ParamStore& p, const std::string& prefix);
Tensor self_attend_backward(const Tensor& x, ParamStore& p, const std::string& prefix,
                            const Tensor& gy);

/// a + attention(a, b): queries from a, keys and values from b. Uses the
/// same residual convention as self_attend, so cross_attend(a, a) with the
/// same weights equals self_attend(a).
Tensor cross_attend(const Tensor& a, const Tensor& b, const ParamStore& p,
                    const std::string& prefix);
AttentionGrads cross_attend_backward(const Tensor& a, const Tensor& b, ParamStore& p,
                                     const std::string& prefix, const Tensor& gy);

/// depth[j] = softplus(w_d . q_v[j] + b_d); height = softplus(w_h . mean_j q_h[j] + b_h).
/// Throws NumericalError if an output underflows to zero.
Prediction heads(const Tensor& q_vertical, const Tensor& q_horizontal, const ParamStore& p);

struct HeadGrads {
  Tensor q_vertical;
  Tensor q_horizontal;
};
HeadGrads heads_backward(const Tensor& q_vertical, const Tensor& q_horizontal, ParamStore& p,
                         const Tensor& g_depth, double g_height);

}  // namespace dopnet
