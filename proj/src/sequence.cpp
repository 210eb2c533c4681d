#include "dopnet/sequence.hpp"

#include <cmath>

#include "dopnet/ops.hpp"

namespace dopnet {
namespace {

constexpr double kZeroNorm = 1e-12;

void check_sequence(const Tensor& q, const char* what) {
  if (q.ndim() != 2) throw ValidationError(std::string(what) + ": expected [W,C] sequence");
}

struct GraphState {
  Tensor features;  // F = q^T, [C,W]
  Tensor norms;     // [C]
  Tensor sim;       // cosine similarity, [C,C]
  Tensor adjacency; // [C,C]
};

GraphState graph_state(const Tensor& q) {
  check_sequence(q, "channel_graph");
  const std::size_t C = q.dim(1), W = q.dim(0);
  if (C < 2) throw ValidationError("channel_graph: need at least 2 channels");
  GraphState s{transpose(q), Tensor({C}), Tensor({C, C}), Tensor({C, C})};
  for (std::size_t c = 0; c < C; ++c) {
    double n = 0.0;
    for (std::size_t j = 0; j < W; ++j) n += s.features[c * W + j] * s.features[c * W + j];
    s.norms[c] = std::sqrt(n);
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t d = 0; d < C; ++d) {
      if (c == d || s.norms[c] < kZeroNorm || s.norms[d] < kZeroNorm) continue;
      double dp = 0.0;
      for (std::size_t j = 0; j < W; ++j) dp += s.features[c * W + j] * s.features[d * W + j];
      s.sim[c * C + d] = dp / (s.norms[c] * s.norms[d]);
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    double m = -1e300;
    for (std::size_t d = 0; d < C; ++d) {
      if (d != c) m = std::max(m, s.sim[c * C + d]);
    }
    double z = 0.0;
    for (std::size_t d = 0; d < C; ++d) {
      if (d == c) continue;
      s.adjacency[c * C + d] = std::exp(s.sim[c * C + d] - m);
      z += s.adjacency[c * C + d];
    }
    for (std::size_t d = 0; d < C; ++d) s.adjacency[c * C + d] /= z;
  }
  return s;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  const std::size_t n = y.dim(1);
  require_shape(b, {n}, "linear bias");
  for (std::size_t i = 0; i < y.dim(0); ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += b[j];
  }
  return y;
}

Tensor column_sums(const Tensor& g) {
  Tensor s({g.dim(1)});
  for (std::size_t i = 0; i < g.dim(0); ++i) {
    for (std::size_t j = 0; j < g.dim(1); ++j) s[j] += g[i * g.dim(1) + j];
  }
  return s;
}

struct AttnState {
  Tensor q, k, v, probs;
  double scale;
};

AttnState attn_state(const Tensor& xq, const Tensor& xkv, const ParamStore& p,
                     const std::string& prefix) {
  check_sequence(xq, "attention");
  check_sequence(xkv, "attention");
  if (xq.dim(1) != xkv.dim(1)) throw ValidationError("attention: channel mismatch");
  AttnState s;
  s.q = linear(xq, p.value(prefix + ".wq"), p.value(prefix + ".bq"));
  s.k = linear(xkv, p.value(prefix + ".wk"), p.value(prefix + ".bk"));
  s.v = linear(xkv, p.value(prefix + ".wv"), p.value(prefix + ".bv"));
  s.scale = 1.0 / std::sqrt(static_cast<double>(s.k.dim(1)));
  s.probs = softmax(scale(matmul(s.q, transpose(s.k)), s.scale), 1);
  return s;
}

}  // namespace

ChannelGraph channel_graph(const Tensor& q) {
  GraphState s = graph_state(q);
  const std::size_t C = q.dim(1);
  Tensor lap({C, C});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t d = 0; d < C; ++d) {
      lap[c * C + d] = (c == d ? 1.0 : 0.0) - s.adjacency[c * C + d];
    }
  }
  return {std::move(s.adjacency), std::move(lap)};
}

Tensor channel_graph_attend(const Tensor& q, const Tensor& weight) {
  const GraphState s = graph_state(q);
  const std::size_t C = q.dim(1);
  require_shape(weight, {C, C}, "graph weight");
  const Tensor h = add(s.features, scale(matmul(s.adjacency, s.features), -1.0));
  return matmul(transpose(h), weight);
}

GraphGrads channel_graph_attend_backward(const Tensor& q, const Tensor& weight, const Tensor& gy) {
  const GraphState s = graph_state(q);
  const std::size_t C = q.dim(1), W = q.dim(0);
  require_shape(gy, q.shape(), "graph cotangent");
  const Tensor& F = s.features;
  const Tensor& A = s.adjacency;
  const Tensor h = add(F, scale(matmul(A, F), -1.0));

  GraphGrads g;
  g.weight = matmul(h, gy);
  const Tensor gh = transpose(matmul(gy, transpose(weight)));  // [C,W]

  Tensor gF = add(gh, scale(matmul(transpose(A), gh), -1.0));
  const Tensor gA = scale(matmul(gh, transpose(F)), -1.0);

  Tensor gS({C, C});
  for (std::size_t c = 0; c < C; ++c) {
    double dotp = 0.0;
    for (std::size_t d = 0; d < C; ++d) dotp += A[c * C + d] * gA[c * C + d];
    for (std::size_t d = 0; d < C; ++d) {
      if (d != c) gS[c * C + d] = A[c * C + d] * (gA[c * C + d] - dotp);
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (s.norms[c] < kZeroNorm) continue;
    for (std::size_t d = 0; d < C; ++d) {
      if (d == c || s.norms[d] < kZeroNorm) continue;
      const double gsym = gS[c * C + d] + gS[d * C + c];
      if (gsym == 0.0) continue;
      const double inv = 1.0 / (s.norms[c] * s.norms[d]);
      const double self = s.sim[c * C + d] / (s.norms[c] * s.norms[c]);
      for (std::size_t j = 0; j < W; ++j) {
        gF[c * W + j] += gsym * (F[d * W + j] * inv - self * F[c * W + j]);
      }
    }
  }
  g.q = transpose(gF);
  return g;
}

Tensor attention(const Tensor& xq, const Tensor& xkv, const ParamStore& p,
                 const std::string& prefix) {
  const AttnState s = attn_state(xq, xkv, p, prefix);
  return matmul(s.probs, s.v);
}

Tensor attention_weights(const Tensor& xq, const Tensor& xkv, const ParamStore& p,
                         const std::string& prefix) {
  return attn_state(xq, xkv, p, prefix).probs;
}

AttentionGrads attention_backward(const Tensor& xq, const Tensor& xkv, ParamStore& p,
                                  const std::string& prefix, const Tensor& gy) {
  const AttnState s = attn_state(xq, xkv, p, prefix);
  require_shape(gy, {xq.dim(0), s.v.dim(1)}, "attention cotangent");
  const Tensor gprobs = matmul(gy, transpose(s.v));
  const Tensor gv = matmul(transpose(s.probs), gy);
  const Tensor glogits = scale(softmax_backward(s.probs, 1, gprobs), s.scale);
  const Tensor gq = matmul(glogits, s.k);
  const Tensor gk = matmul(transpose(glogits), s.q);

  p.accumulate(prefix + ".wq", matmul(transpose(xq), gq));
  p.accumulate(prefix + ".bq", column_sums(gq));
  p.accumulate(prefix + ".wk", matmul(transpose(xkv), gk));
  p.accumulate(prefix + ".bk", column_sums(gk));
  p.accumulate(prefix + ".wv", matmul(transpose(xkv), gv));
  p.accumulate(prefix + ".bv", column_sums(gv));

  AttentionGrads g;
  g.query_source = matmul(gq, transpose(p.value(prefix + ".wq")));
  g.kv_source = add(matmul(gk, transpose(p.value(prefix + ".wk"))),
                    matmul(gv, transpose(p.value(prefix + ".wv"))));
  return g;
}

Tensor self_attend(const Tensor& x, const ParamStore& p, const std::string& prefix) {
  return add(x, attention(x, x, p, prefix));
}

Tensor self_attend_backward(const Tensor& x, ParamStore& p, const std::string& prefix,
                            const Tensor& gy) {
  AttentionGrads g = attention_backward(x, x, p, prefix, gy);
  Tensor gx = gy;
  gx += g.query_source;
  gx += g.kv_source;
  return gx;
}

Tensor cross_attend(const Tensor& a, const Tensor& b, const ParamStore& p,
                    const std::string& prefix) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(0) != b.dim(0)) {
    throw ValidationError("cross_attend: sequence widths differ (" + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()) + ")");
  }
  return add(a, attention(a, b, p, prefix));
}

AttentionGrads cross_attend_backward(const Tensor& a, const Tensor& b, ParamStore& p,
                                     const std::string& prefix, const Tensor& gy) {
  AttentionGrads g = attention_backward(a, b, p, prefix, gy);
  g.query_source += gy;
  return g;
}

Prediction heads(const Tensor& q_vertical, const Tensor& q_horizontal, const ParamStore& p) {
  check_sequence(q_vertical, "heads");
  check_sequence(q_horizontal, "heads");
  const std::size_t W = q_vertical.dim(0), C = q_vertical.dim(1);
  const Tensor& wd = p.value("head.depth.weight");
  const Tensor& wh = p.value("head.height.weight");
  require_shape(wd, {C}, "head.depth.weight");
  require_shape(wh, {C}, "head.height.weight");
  const double bd = p.value("head.depth.bias")[0];
  const double bh = p.value("head.height.bias")[0];

  Prediction out{Tensor({W}), 0.0};
  for (std::size_t j = 0; j < W; ++j) {
    double z = bd;
    for (std::size_t c = 0; c < C; ++c) z += wd[c] * q_vertical[j * C + c];
    out.horizon_depth[j] = softplus(z);
    // softplus underflows to 0 below about -745
    if (!(out.horizon_depth[j] > 0.0) || !std::isfinite(out.horizon_depth[j])) {
      throw NumericalError("heads: depth at column " + std::to_string(j) + " is not positive (pre-activation " +
                           std::to_string(z) + ")");
    }
  }
  const Tensor m = mean_axis(q_horizontal, 0);
  double z = bh;
  for (std::size_t c = 0; c < C; ++c) z += wh[c] * m[c];
  out.room_height_m = softplus(z);
  if (!(out.room_height_m > 0.0) || !std::isfinite(out.room_height_m)) {
    throw NumericalError("heads: room height is not positive (pre-activation " + std::to_string(z) + ")");
  }
  return out;
}

HeadGrads heads_backward(const Tensor& q_vertical, const Tensor& q_horizontal, ParamStore& p,
                         const Tensor& g_depth, double g_height) {
  const std::size_t W = q_vertical.dim(0), C = q_vertical.dim(1);
  require_shape(g_depth, {W}, "depth cotangent");
  const Tensor& wd = p.value("head.depth.weight");
  const Tensor& wh = p.value("head.height.weight");
  const double bd = p.value("head.depth.bias")[0];
  const double bh = p.value("head.height.bias")[0];

  HeadGrads g{Tensor(q_vertical.shape()), Tensor(q_horizontal.shape())};
  Tensor gwd({C}), gbd({1}), gwh({C}), gbh({1});
  for (std::size_t j = 0; j < W; ++j) {
    double z = bd;
    for (std::size_t c = 0; c < C; ++c) z += wd[c] * q_vertical[j * C + c];
    const double gz = g_depth[j] * sigmoid(z);
    gbd[0] += gz;
    for (std::size_t c = 0; c < C; ++c) {
      gwd[c] += gz * q_vertical[j * C + c];
      g.q_vertical[j * C + c] = gz * wd[c];
    }
  }
  const Tensor m = mean_axis(q_horizontal, 0);
  double z = bh;
  for (std::size_t c = 0; c < C; ++c) z += wh[c] * m[c];
  const double gz = g_height * sigmoid(z);
  gbh[0] = gz;
  Tensor gm({C});
  for (std::size_t c = 0; c < C; ++c) {
    gwh[c] = gz * m[c];
    gm[c] = gz * wh[c];
  }
  g.q_horizontal = mean_axis_backward(q_horizontal.shape(), 0, gm);

  p.accumulate("head.depth.weight", gwd);
  p.accumulate("head.depth.bias", gbd);
  p.accumulate("head.height.weight", gwh);
  p.accumulate("head.height.bias", gbh);
  return g;
}

}  // namespace dopnet
