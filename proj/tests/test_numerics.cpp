#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dopnet/grad_check.hpp"
#include "dopnet/ops.hpp"
#include "dopnet/param_store.hpp"
#include "dopnet/tensor.hpp"

using namespace dopnet;

namespace {

Tensor randn(Shape s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(s));
  for (double& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ValidationError);
  Tensor t({2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at(1, 2), 5.0);
  EXPECT_EQ(t.reshaped({3, 2}).at(2, 0), 4.0);
  EXPECT_THROW(t.reshaped({4}), ValidationError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(t, "t"), NumericalError);
}

TEST(BilinearSample, LatticePointIsExact) {
  const Tensor f = randn({2, 4, 6}, 1);
  const Tensor c({1, 2}, std::vector<double>{2.0, 3.0});
  const Tensor y = bilinear_sample(f, c);
  EXPECT_DOUBLE_EQ(y.at(0, 0), f.at(0, 2, 3));
  EXPECT_DOUBLE_EQ(y.at(1, 0), f.at(1, 2, 3));
}

TEST(BilinearSample, WrapMidpoint) {
  Tensor f({1, 1, 8}, 0.0);
  f.at(0, 0, 7) = 2.0;
  f.at(0, 0, 0) = 4.0;
  const Tensor c({1, 2}, std::vector<double>{0.0, 7.5});
  EXPECT_NEAR(bilinear_sample(f, c)[0], 3.0, 1e-15);
  const Tensor neg({1, 2}, std::vector<double>{0.0, -0.5});
  EXPECT_NEAR(bilinear_sample(f, neg)[0], 3.0, 1e-15);
}

TEST(BilinearSample, ConstantMap) {
  const Tensor f({1, 5, 10}, 1.25);
  const Tensor c = randn({20, 2}, 2, 7.0);
  const Tensor y = bilinear_sample(f, c);
  for (double v : y.data()) EXPECT_NEAR(v, 1.25, 1e-14);
}

TEST(BilinearSample, RowsClamp) {
  Tensor f({1, 2, 2}, std::vector<double>{1, 1, 5, 5});
  const Tensor c({2, 2}, std::vector<double>{-3.0, 0.0, 9.0, 1.0});
  const Tensor y = bilinear_sample(f, c);
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], 5.0);
}

TEST(Softmax, Uniform) {
  const Tensor y = softmax(Tensor({3}, 0.0), 0);
  for (double v : y.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ClosedForm) {
  const Tensor x({3}, std::vector<double>{std::log(1.0), std::log(2.0), std::log(3.0)});
  const Tensor y = softmax(x, 0);
  EXPECT_NEAR(y[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(y[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(y[2], 3.0 / 6.0, 1e-15);
}

TEST(Softmax, ShiftInvariant) {
  const Tensor x = randn({4, 5}, 3);
  Tensor xs = x;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) xs.at(i, j) += 100.0;
  }
  EXPECT_LT(max_abs_diff(softmax(x, 1), softmax(xs, 1)), 1e-14);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const Tensor x({2}, std::vector<double>{1000.0, -1000.0});
  const Tensor y = softmax(x, 0);
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y[0], 1.0, 1e-15);
}

TEST(Conv3x3, StrideShapes) {
  const Tensor x = randn({2, 16, 32}, 4);
  const Tensor w = randn({3, 2, 3, 3}, 5);
  const Tensor b({3}, 0.0);
  EXPECT_EQ(conv3x3(x, w, b, 1).shape(), (Shape{3, 16, 32}));
  EXPECT_EQ(conv3x3(x, w, b, 2).shape(), (Shape{3, 8, 16}));
}

TEST(Conv3x3, CircularColumns) {
  // Rotating the input by one column rotates the stride-1 output by one.
  const Tensor x = randn({2, 6, 10}, 6);
  const Tensor w = randn({2, 2, 3, 3}, 7);
  const Tensor b = randn({2}, 8);
  Tensor xr = x, yr;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t j = 0; j < 10; ++j) xr.at(c, r, (j + 1) % 10) = x.at(c, r, j);
  const Tensor y = conv3x3(x, w, b, 1), y2 = conv3x3(xr, w, b, 1);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(y2.at(c, r, (j + 1) % 10), y.at(c, r, j), 1e-12);
}

TEST(ResizeBilinear, SameSizeIsIdentity) {
  const Tensor x = randn({2, 4, 8}, 9);
  EXPECT_LT(max_abs_diff(resize_bilinear(x, 4, 8), x), 1e-15);
}

TEST(ParamStore, InsertionOrderAndGradShapes) {
  ParamStore p;
  p.add("b", Tensor({2, 3}, 1.0));
  p.add("a", Tensor({4}, 2.0));
  EXPECT_THROW(p.add("a", Tensor({1})), ValidationError);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.entries()[0].name, "b");
  EXPECT_EQ(p.entries()[1].name, "a");
  for (const auto& e : p.entries()) EXPECT_EQ(e.grad.shape(), e.value.shape());
  p.accumulate("a", Tensor({4}, 0.5));
  p.accumulate("a", Tensor({4}, 0.5));
  EXPECT_DOUBLE_EQ(p.grad("a")[3], 1.0);
  EXPECT_THROW(p.accumulate("a", Tensor({3}, 1.0)), ValidationError);
  p.zero_grad();
  EXPECT_DOUBLE_EQ(p.grad("a")[3], 0.0);
}

TEST(ParamStore, DopwRoundTrip) {
  ParamStore p;
  p.add("conv.weight", randn({2, 3, 3, 3}, 10));
  p.add("bias", Tensor({1}, 0.25));
  const ParamStore q = decode_dopw(encode_dopw(p));
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q.entries()[0].name, "conv.weight");
  EXPECT_EQ(q.value("conv.weight").shape(), (Shape{2, 3, 3, 3}));
  // f32 payload
  EXPECT_LT(max_abs_diff(q.value("conv.weight"), p.value("conv.weight")), 1e-6);
  EXPECT_EQ(encode_dopw(q), encode_dopw(p));
}

TEST(ParamStore, DopwRejectsGarbage) {
  std::vector<unsigned char> bytes = encode_dopw(ParamStore{});
  bytes[0] = 'X';
  EXPECT_THROW(decode_dopw(bytes), ValidationError);
  EXPECT_THROW(decode_dopw({'D', 'O', 'P', 'W', 1}), ValidationError);
}

TEST(GradCheck, LinearMapIsExact) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Tensor W = randn({4, 5}, 20 + seed);
    DifferentiableOp op{"linear",
                        [W](const std::vector<Tensor>& in) { return matmul(W, in[0]); },
                        [W](const std::vector<Tensor>&, const Tensor& gy) {
                          return std::vector<Tensor>{matmul(transpose(W), gy)};
                        }};
    const GradCheckReport r = grad_check(op, {randn({5, 3}, 30 + seed)}, 1e-4, {seed});
    EXPECT_LT(r.max_rel_err, 1e-8) << "seed " << seed;
  }
}

TEST(GradCheck, Softmax) {
  DifferentiableOp op{"softmax", [](const std::vector<Tensor>& in) { return softmax(in[0], 1); },
                      [](const std::vector<Tensor>& in, const Tensor& gy) {
                        return std::vector<Tensor>{softmax_backward(softmax(in[0], 1), 1, gy)};
                      }};
  EXPECT_LT(grad_check(op, {randn({3, 6}, 40)}, 1e-4).max_rel_err, 1e-6);
}

TEST(GradCheck, CorruptedGradientIsFlagged) {
  const Tensor W = randn({4, 5}, 50, 10.0);
  DifferentiableOp op{"linear_x2",
                      [W](const std::vector<Tensor>& in) { return matmul(W, in[0]); },
                      [W](const std::vector<Tensor>&, const Tensor& gy) {
                        return std::vector<Tensor>{scale(matmul(transpose(W), gy), 2.0)};
                      }};
  const GradCheckReport r = grad_check(op, {randn({5, 3}, 51)}, 1e-4);
  EXPECT_GT(r.max_rel_err, 1e-3);
  EXPECT_NEAR(r.max_rel_err, 0.5, 0.05);
}
