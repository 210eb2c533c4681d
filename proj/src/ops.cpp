#include "dopnet/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dopnet {
namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ValidationError("axis out of range");
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// Interpolation stencil for one (row, col) coordinate.
struct Stencil {
  std::size_t y0, y1, x0, x1;
  double ay, ax;
  bool row_inside;  // false when the row coordinate was clamped
};

Stencil make_stencil(double y, double x, std::size_t H, std::size_t W) {
  if (!std::isfinite(y) || !std::isfinite(x)) {
    throw ValidationError("bilinear_sample: non-finite coordinate");
  }
  Stencil s{};
  const double xf = std::floor(x);
  s.ax = x - xf;
  const auto wi = static_cast<long long>(W);
  long long xi = static_cast<long long>(xf) % wi;
  if (xi < 0) xi += wi;
  s.x0 = static_cast<std::size_t>(xi);
  s.x1 = (s.x0 + 1) % W;

  const double ymax = static_cast<double>(H - 1);
  s.row_inside = y >= 0.0 && y <= ymax;
  const double yc = std::clamp(y, 0.0, ymax);
  if (H == 1) {
    s.y0 = s.y1 = 0;
    s.ay = 0.0;
    s.row_inside = false;
  } else {
    double yf = std::floor(yc);
    if (yf >= ymax) yf = ymax - 1.0;
    s.y0 = static_cast<std::size_t>(yf);
    s.y1 = s.y0 + 1;
    s.ay = yc - yf;
  }
  return s;
}

void check_sample_args(const Tensor& f, const Tensor& coords) {
  if (f.ndim() != 3) throw ValidationError("bilinear_sample: feature must be [C,H,W]");
  if (coords.ndim() != 2 || coords.dim(1) != 2) {
    throw ValidationError("bilinear_sample: coords must be [N,2], got " +
                          shape_str(coords.shape()));
  }
  if (f.dim(1) == 0 || f.dim(2) == 0) throw ValidationError("bilinear_sample: empty map");
}

Tensor resize_coords(std::size_t H, std::size_t W, std::size_t h, std::size_t w) {
  Tensor coords({h * w, 2});
  const double sy = static_cast<double>(H) / static_cast<double>(h);
  const double sx = static_cast<double>(W) / static_cast<double>(w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      coords[(i * w + j) * 2 + 0] = (static_cast<double>(i) + 0.5) * sy - 0.5;
      coords[(i * w + j) * 2 + 1] = (static_cast<double>(j) + 0.5) * sx - 0.5;
    }
  }
  return coords;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  Tensor out = a;
  out += b;
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  out *= s;
  return out;
}

BinaryGrads mul_backward(const Tensor& a, const Tensor& b, const Tensor& gy) {
  return {mul(gy, b), mul(gy, a)};
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& gy) {
  require_same(y, gy, "sigmoid_backward");
  Tensor gx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = gy[i] * y[i] * (1.0 - y[i]);
  return gx;
}

double softplus(double x) {
  // log(1 + e^x) without overflow
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Tensor softplus(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = softplus(x[i]);
  return out;
}

Tensor softplus_backward(const Tensor& x, const Tensor& gy) {
  require_same(x, gy, "softplus_backward");
  Tensor gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = gy[i] * sigmoid(x[i]);
  return gx;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ValidationError("matmul: incompatible shapes " + shape_str(a.shape()) +
                          " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) po[i * n + j] += av * pb[p * n + j];
    }
  }
  return out;
}

BinaryGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& gy) {
  return {matmul(gy, transpose(b)), matmul(transpose(a), gy)};
}

Tensor transpose(const Tensor& m) {
  if (m.ndim() != 2) throw ValidationError("transpose: expected 2-D tensor");
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m[i * c + j];
  }
  return out;
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.n; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[o * s.inner + i] += x[(o * s.n + k) * s.inner + i];
      }
    }
  }
  out *= inv;
  return out;
}

Tensor mean_axis_backward(const Shape& input_shape, std::size_t axis,
                          const Tensor& gy) {
  const AxisSplit s = split_axis(input_shape, axis);
  if (gy.size() != s.outer * s.inner) {
    throw ValidationError("mean_axis_backward: cotangent size mismatch");
  }
  Tensor gx(input_shape);
  const double inv = 1.0 / static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.n; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        gx[(o * s.n + k) * s.inner + i] = gy[o * s.inner + i] * inv;
      }
    }
  }
  return gx;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double m = x[base];
      for (std::size_t k = 1; k < s.n; ++k) m = std::max(m, x[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const double e = std::exp(x[base + k * s.inner] - m);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.n; ++k) out[base + k * s.inner] /= z;
    }
  }
  return out;
}

Tensor softmax_backward(const Tensor& y, std::size_t axis, const Tensor& gy) {
  require_same(y, gy, "softmax_backward");
  const AxisSplit s = split_axis(y.shape(), axis);
  Tensor gx(y.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double d = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        d += y[base + k * s.inner] * gy[base + k * s.inner];
      }
      for (std::size_t k = 0; k < s.n; ++k) {
        const std::size_t idx = base + k * s.inner;
        gx[idx] = y[idx] * (gy[idx] - d);
      }
    }
  }
  return gx;
}

Tensor bilinear_sample(const Tensor& f, const Tensor& coords) {
  check_sample_args(f, coords);
  const std::size_t C = f.dim(0), H = f.dim(1), W = f.dim(2), N = coords.dim(0);
  Tensor out({C, N});
  const double* pf = f.ptr();
  for (std::size_t n = 0; n < N; ++n) {
    const Stencil s = make_stencil(coords[2 * n], coords[2 * n + 1], H, W);
    const double w00 = (1 - s.ay) * (1 - s.ax), w01 = (1 - s.ay) * s.ax;
    const double w10 = s.ay * (1 - s.ax), w11 = s.ay * s.ax;
    for (std::size_t c = 0; c < C; ++c) {
      const double* m = pf + c * H * W;
      out[c * N + n] = w00 * m[s.y0 * W + s.x0] + w01 * m[s.y0 * W + s.x1] +
                       w10 * m[s.y1 * W + s.x0] + w11 * m[s.y1 * W + s.x1];
    }
  }
  return out;
}

SampleGrads bilinear_sample_backward(const Tensor& f, const Tensor& coords,
                                     const Tensor& gy) {
  check_sample_args(f, coords);
  const std::size_t C = f.dim(0), H = f.dim(1), W = f.dim(2), N = coords.dim(0);
  require_shape(gy, {C, N}, "bilinear_sample_backward cotangent");
  SampleGrads g{Tensor(f.shape()), Tensor(coords.shape())};
  const double* pf = f.ptr();
  double* gf = g.feature.ptr();
  for (std::size_t n = 0; n < N; ++n) {
    const Stencil s = make_stencil(coords[2 * n], coords[2 * n + 1], H, W);
    const double w00 = (1 - s.ay) * (1 - s.ax), w01 = (1 - s.ay) * s.ax;
    const double w10 = s.ay * (1 - s.ax), w11 = s.ay * s.ax;
    double gyy = 0.0, gxx = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double g_out = gy[c * N + n];
      if (g_out == 0.0) continue;
      const std::size_t off = c * H * W;
      const double f00 = pf[off + s.y0 * W + s.x0], f01 = pf[off + s.y0 * W + s.x1];
      const double f10 = pf[off + s.y1 * W + s.x0], f11 = pf[off + s.y1 * W + s.x1];
      gf[off + s.y0 * W + s.x0] += g_out * w00;
      gf[off + s.y0 * W + s.x1] += g_out * w01;
      gf[off + s.y1 * W + s.x0] += g_out * w10;
      gf[off + s.y1 * W + s.x1] += g_out * w11;
      gxx += g_out * ((1 - s.ay) * (f01 - f00) + s.ay * (f11 - f10));
      if (s.row_inside) gyy += g_out * ((1 - s.ax) * (f10 - f00) + s.ax * (f11 - f01));
    }
    g.coords[2 * n] = gyy;
    g.coords[2 * n + 1] = gxx;
  }
  return g;
}

Tensor resize_bilinear(const Tensor& f, std::size_t h, std::size_t w) {
  if (f.ndim() != 3) throw ValidationError("resize_bilinear: expected [C,H,W]");
  if (h == 0 || w == 0) throw ValidationError("resize_bilinear: empty target");
  const Tensor coords = resize_coords(f.dim(1), f.dim(2), h, w);
  return bilinear_sample(f, coords).reshaped({f.dim(0), h, w});
}

Tensor resize_bilinear_backward(const Tensor& f, std::size_t h, std::size_t w,
                                const Tensor& gy) {
  require_shape(gy, {f.dim(0), h, w}, "resize_bilinear_backward cotangent");
  const Tensor coords = resize_coords(f.dim(1), f.dim(2), h, w);
  return bilinear_sample_backward(f, coords, gy.reshaped({f.dim(0), h * w})).feature;
}

Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias,
               std::size_t stride) {
  if (x.ndim() != 3) throw ValidationError("conv3x3: input must be [C,H,W]");
  if (stride == 0) throw ValidationError("conv3x3: stride must be positive");
  const std::size_t I = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (weight.ndim() != 4 || weight.dim(1) != I || weight.dim(2) != 3 ||
      weight.dim(3) != 3) {
    throw ValidationError("conv3x3: weight must be [O," + std::to_string(I) +
                          ",3,3], got " + shape_str(weight.shape()));
  }
  const std::size_t O = weight.dim(0);
  require_shape(bias, {O}, "conv3x3 bias");
  const std::size_t Ho = (H - 1) / stride + 1, Wo = (W - 1) / stride + 1;
  Tensor out({O, Ho, Wo});
  const double* px = x.ptr();
  const double* pw = weight.ptr();
  double* po = out.ptr();
  for (std::size_t o = 0; o < O; ++o) {
    for (std::size_t i = 0; i < Ho * Wo; ++i) po[o * Ho * Wo + i] = bias[o];
  }
  for (std::size_t yo = 0; yo < Ho; ++yo) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      const long long yi = static_cast<long long>(yo * stride + ky) - 1;
      if (yi < 0 || yi >= static_cast<long long>(H)) continue;
      for (std::size_t xo = 0; xo < Wo; ++xo) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t xi = (xo * stride + kx + W - 1) % W;
          for (std::size_t c = 0; c < I; ++c) {
            const double v = px[(c * H + static_cast<std::size_t>(yi)) * W + xi];
            for (std::size_t o = 0; o < O; ++o) {
              po[(o * Ho + yo) * Wo + xo] += pw[((o * I + c) * 3 + ky) * 3 + kx] * v;
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv3x3_backward(const Tensor& x, const Tensor& weight,
                           std::size_t stride, const Tensor& gy) {
  const std::size_t I = x.dim(0), H = x.dim(1), W = x.dim(2), O = weight.dim(0);
  const std::size_t Ho = (H - 1) / stride + 1, Wo = (W - 1) / stride + 1;
  require_shape(gy, {O, Ho, Wo}, "conv3x3_backward cotangent");
  ConvGrads g{Tensor(x.shape()), Tensor(weight.shape()), Tensor({O})};
  const double* px = x.ptr();
  const double* pw = weight.ptr();
  const double* pg = gy.ptr();
  double* gx = g.input.ptr();
  double* gw = g.weight.ptr();
  for (std::size_t o = 0; o < O; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < Ho * Wo; ++i) s += pg[o * Ho * Wo + i];
    g.bias[o] = s;
  }
  for (std::size_t yo = 0; yo < Ho; ++yo) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      const long long yi = static_cast<long long>(yo * stride + ky) - 1;
      if (yi < 0 || yi >= static_cast<long long>(H)) continue;
      for (std::size_t xo = 0; xo < Wo; ++xo) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t xi = (xo * stride + kx + W - 1) % W;
          for (std::size_t c = 0; c < I; ++c) {
            const std::size_t xidx = (c * H + static_cast<std::size_t>(yi)) * W + xi;
            const double v = px[xidx];
            double acc = 0.0;
            for (std::size_t o = 0; o < O; ++o) {
              const double go = pg[(o * Ho + yo) * Wo + xo];
              const std::size_t widx = ((o * I + c) * 3 + ky) * 3 + kx;
              gw[widx] += go * v;
              acc += go * pw[widx];
            }
            gx[xidx] += acc;
          }
        }
      }
    }
  }
  return g;
}

Tensor avg_pool2(const Tensor& x) {
  if (x.ndim() != 3 || x.dim(1) % 2 || x.dim(2) % 2) {
    throw ValidationError("avg_pool2: expected [C,H,W] with even H, W");
  }
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor out({C, H / 2, W / 2});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H / 2; ++y) {
      for (std::size_t xx = 0; xx < W / 2; ++xx) {
        const std::size_t b = (c * H + 2 * y) * W + 2 * xx;
        out[(c * (H / 2) + y) * (W / 2) + xx] =
            0.25 * (x[b] + x[b + 1] + x[b + W] + x[b + W + 1]);
      }
    }
  }
  return out;
}

Tensor avg_pool2_backward(const Shape& input_shape, const Tensor& gy) {
  const std::size_t C = input_shape.at(0), H = input_shape.at(1), W = input_shape.at(2);
  require_shape(gy, {C, H / 2, W / 2}, "avg_pool2_backward cotangent");
  Tensor gx(input_shape);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        gx[(c * H + y) * W + xx] = 0.25 * gy[(c * (H / 2) + y / 2) * (W / 2) + xx / 2];
      }
    }
  }
  return gx;
}

}  // namespace dopnet
