#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dopnet/model.hpp"
#include "dopnet/ops.hpp"
#include "dopnet/sequence.hpp"
#include "dopnet/sphere.hpp"

using namespace dopnet;

namespace {

Tensor randn(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor t(std::move(s));
  for (double& v : t.data()) v = n(rng);
  return t;
}

Tensor eye(std::size_t n) {
  Tensor t({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

ParamStore toy_params() { return init_params({8, 2, 64, 128, 3}); }

}  // namespace

TEST(ChannelGraph, RowStochasticZeroDiagonal) {
  const ChannelGraph g = channel_graph(randn({16, 8}, 1));
  for (std::size_t c = 0; c < 8; ++c) {
    double s = 0.0;
    for (std::size_t d = 0; d < 8; ++d) s += g.adjacency.at(c, d);
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(g.adjacency.at(c, c), 0.0);
    EXPECT_NEAR(g.laplacian.at(c, c), 1.0, 1e-15);
  }
}

TEST(ChannelGraph, IdenticalChannelsCollapse) {
  const Tensor col = randn({16, 1}, 2);
  Tensor q({16, 8});
  for (std::size_t j = 0; j < 16; ++j)
    for (std::size_t c = 0; c < 8; ++c) q.at(j, c) = col[j];
  const Tensor y = channel_graph_attend(q, randn({8, 8}, 3));
  EXPECT_LT(std::sqrt(dot(y, y)), 1e-10);
}

TEST(ChannelGraph, TwoOrthogonalChannels) {
  Tensor q({4, 2}, std::vector<double>{1, 0, 0, 1, -1, 0, 0, -1});
  const ChannelGraph g = channel_graph(q);
  EXPECT_DOUBLE_EQ(g.adjacency.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(g.adjacency.at(1, 0), 1.0);
  const Tensor y = channel_graph_attend(q, eye(2));
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(y.at(j, 0), q.at(j, 0) - q.at(j, 1));
    EXPECT_DOUBLE_EQ(y.at(j, 1), q.at(j, 1) - q.at(j, 0));
  }
}

TEST(SelfAttend, SingleToken) {
  const ParamStore p = toy_params();
  const Tensor x = randn({1, 8}, 4);
  const Tensor a = attention_weights(x, x, p, "selfattn.h");
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  const Tensor v = add(matmul(x, p.value("selfattn.h.wv")), p.value("selfattn.h.bv").reshaped({1, 8}));
  EXPECT_LT(max_abs_diff(self_attend(x, p, "selfattn.h"), add(x, v)), 1e-14);
}

TEST(SelfAttend, PermutationEquivariant) {
  const ParamStore p = toy_params();
  const Tensor x = randn({8, 12}, 5).reshaped({12, 8});
  const Tensor xr = rotate_panorama(transpose(x), 5);  // [C,W] column shift
  const Tensor y = self_attend(x, p, "selfattn.v");
  const Tensor yr = self_attend(transpose(xr), p, "selfattn.v");
  EXPECT_LT(max_abs_diff(transpose(rotate_panorama(transpose(y), 5)), yr), 1e-12);
}

TEST(CrossAttend, NullDonor) {
  const ParamStore p = toy_params();
  const Tensor a = randn({10, 8}, 6);
  EXPECT_LT(max_abs_diff(cross_attend(a, Tensor({10, 8}, 0.0), p, "crossattn.hv"), a), 1e-15);
}

TEST(CrossAttend, TiedWeightsMatchSelfAttend) {
  const ParamStore p = toy_params();
  const Tensor a = randn({10, 8}, 7);
  EXPECT_LT(max_abs_diff(cross_attend(a, a, p, "selfattn.h"), self_attend(a, p, "selfattn.h")), 1e-15);
}

TEST(Heads, InitialBiasGivesOneMeter) {
  const ParamStore p = toy_params();
  const Prediction pr = heads(Tensor({8, 8}, 0.0), Tensor({8, 8}, 0.0), p);
  for (double d : pr.horizon_depth.data()) EXPECT_NEAR(d, 1.0, 1e-15);
  EXPECT_NEAR(pr.room_height_m, 1.0, 1e-15);
}

TEST(Heads, AlwaysPositive) {
  ParamStore p = toy_params();
  Tensor& wd = p.value("head.depth.weight");
  for (double& w : wd.data()) w = 1.0;
  // Pre-activations from -700 to +700.
  Tensor qv({15, 8});
  for (std::size_t j = 0; j < 15; ++j)
    for (std::size_t c = 0; c < 8; ++c) qv.at(j, c) = (static_cast<double>(j) - 7.0) * 12.5;
  const Prediction pr = heads(qv, randn({8, 8}, 9), p);
  for (double d : pr.horizon_depth.data()) EXPECT_GT(d, 0.0);
  EXPECT_GT(pr.room_height_m, 0.0);
  // Beyond double range the head refuses instead of returning a zero depth.
  qv *= 10.0;
  EXPECT_THROW(heads(qv, randn({8, 8}, 9), p), NumericalError);
}
