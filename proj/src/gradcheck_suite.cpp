#include "dopnet/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "dopnet/blocks.hpp"
#include "dopnet/layout.hpp"
#include "dopnet/losses.hpp"
#include "dopnet/model.hpp"
#include "dopnet/ops.hpp"
#include "dopnet/sequence.hpp"
#include "dopnet/sphere.hpp"

namespace dopnet {
namespace {

constexpr std::size_t kC = 8;
constexpr std::size_t kHs = 16;
constexpr std::size_t kWs = 32;
constexpr std::size_t kHeads = 2;
constexpr std::size_t kBigProbes = 256;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  Tensor normal(const Shape& shape, double stddev = 1.0) {
    std::normal_distribution<double> d(0.0, stddev);
    Tensor t(shape);
    for (double& v : t.data()) v = d(rng_);
    return t;
  }
  Tensor uniform(const Shape& shape, double lo, double hi) {
    Tensor t(shape);
    for (double& v : t.data()) v = uniform(lo, hi);
    return t;
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  // Offsets added to `base` so every coordinate lands at least 0.1 away
  // from an integer.
  Tensor safe_offsets(const Tensor& base) {
    Tensor off(base.shape());
    for (std::size_t i = 0; i < base.size(); ++i) {
      double target = base[i] + (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(0.1, 0.4);
      const double frac = target - std::floor(target);
      if (frac < 0.1 || frac > 0.9) target += 0.25;
      off[i] = target - base[i];
    }
    return off;
  }

 private:
  std::mt19937_64 rng_;
};

Tensor flatten_all(const std::vector<Tensor>& parts) {
  std::size_t n = 0;
  for (const Tensor& t : parts) n += t.size();
  Tensor out({n});
  std::size_t k = 0;
  for (const Tensor& t : parts) {
    for (double v : t.data()) out[k++] = v;
  }
  return out;
}

std::vector<Tensor> split_like(const Tensor& flat, const std::vector<Shape>& shapes) {
  std::vector<Tensor> out;
  std::size_t k = 0;
  for (const Shape& s : shapes) {
    Tensor t(s);
    for (double& v : t.data()) v = flat[k++];
    out.push_back(std::move(t));
  }
  return out;
}

Tensor scalar(double v) { return Tensor({1}, v); }

// Parameters occupy inputs[first..first+names.size()).
ParamStore store_from(const std::vector<std::string>& names, const std::vector<Tensor>& in,
                      std::size_t first) {
  ParamStore p;
  for (std::size_t i = 0; i < names.size(); ++i) p.add(names[i], in[first + i]);
  return p;
}

void append_grads(std::vector<Tensor>& out, const ParamStore& p,
                  const std::vector<std::string>& names) {
  for (const std::string& n : names) out.push_back(p.grad(n));
}

std::vector<std::string> attn_names(const std::string& prefix) {
  std::vector<std::string> n;
  for (const char* f : {"wq", "bq", "wk", "bk", "wv", "bv"}) n.push_back(prefix + "." + f);
  return n;
}

std::vector<Tensor> attn_params(Gen& g) {
  const double s = 1.0 / std::sqrt(static_cast<double>(kC));
  return {g.normal({kC, kC}, s), g.normal({kC}, 0.1), g.normal({kC, kC}, s),
          g.normal({kC}, 0.1),   g.normal({kC, kC}, s), g.normal({kC}, 0.1)};
}

using Builder = std::function<GradCheckCase(Gen&)>;

std::vector<std::pair<std::string, Builder>> registry() {
  std::vector<std::pair<std::string, Builder>> r;

  r.emplace_back("bilinear_sample", [](Gen& g) {
    Tensor coords({200, 2});
    for (std::size_t i = 0; i < 200; ++i) {
      coords[2 * i] = g.uniform(0.0, kHs - 1.0);
      coords[2 * i + 1] = g.uniform(-3.0, kWs + 3.0);
    }
    coords += g.safe_offsets(coords);
    for (std::size_t i = 0; i < 200; ++i) {
      // keep rows strictly inside so the clamp kink is never probed
      coords[2 * i] = std::clamp(coords[2 * i], 0.15, kHs - 1.15);
    }
    DifferentiableOp op{"bilinear_sample",
                        [](const std::vector<Tensor>& in) { return bilinear_sample(in[0], in[1]); },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          SampleGrads s = bilinear_sample_backward(in[0], in[1], gy);
                          return std::vector<Tensor>{s.feature, s.coords};
                        }};
    return GradCheckCase{op, {g.normal({kC, kHs, kWs}), coords}};
  });

  for (auto [name, h, w] : {std::tuple{"resize_bilinear.up", kHs / 2, kWs / 2},
                            std::tuple{"resize_bilinear.down", kHs * 2, kWs * 2}}) {
    r.emplace_back(name, [name, h, w](Gen& g) {
      DifferentiableOp op{name,
                          [](const std::vector<Tensor>& in) {
                            return resize_bilinear(in[0], kHs, kWs);
                          },
                          [](const std::vector<Tensor>& in, const Tensor& gy) {
                            return std::vector<Tensor>{resize_bilinear_backward(in[0], kHs, kWs, gy)};
                          }};
      return GradCheckCase{op, {g.normal({kC, h, w})}};
    });
  }

  r.emplace_back("distortion_gather", [](Gen& g) {
    const Tensor base = tangent_grid(EquirectGrid(kHs, kWs));
    DifferentiableOp op{
        "distortion_gather",
        [base](const std::vector<Tensor>& in) { return distortion_gather(in[0], base, in[1]); },
        [base](const std::vector<Tensor>& in, const Tensor& gy) {
          GatherGrads gg = distortion_gather_backward(in[0], base, in[1], gy);
          return std::vector<Tensor>{gg.feature, gg.offsets};
        }};
    return GradCheckCase{op, {g.normal({kC, kHs, kWs}), g.safe_offsets(base)}, kBigProbes};
  });

  r.emplace_back("multiscale_gather", [](Gen& g) {
    const Tensor base = tangent_grid(EquirectGrid(kHs, kWs));
    auto ms_from = [](const std::vector<Tensor>& in) {
      MultiScaleFeatures ms;
      for (std::size_t s = 0; s < kNumScales; ++s) ms.scales[s] = in[s];
      return ms;
    };
    DifferentiableOp op{
        "multiscale_gather",
        [base, ms_from](const std::vector<Tensor>& in) {
          return multiscale_gather(ms_from(in), base, in[kNumScales]);
        },
        [base, ms_from](const std::vector<Tensor>& in, const Tensor& gy) {
          MultiscaleGatherGrads mg = multiscale_gather_backward(ms_from(in), base, in[kNumScales], gy);
          std::vector<Tensor> out(mg.scales.begin(), mg.scales.end());
          out.push_back(mg.offsets);
          return out;
        }};
    std::vector<Tensor> in;
    for (std::size_t s = 0; s < kNumScales; ++s) {
      const std::size_t f = std::size_t{1} << s;
      in.push_back(g.normal({kC, 4 * kHs / (2 * f), 4 * kWs / (2 * f)}));
    }
    in.push_back(g.safe_offsets(base));
    return GradCheckCase{op, in, kBigProbes};
  });

  r.emplace_back("csda_attend", [](Gen& g) {
    const std::vector<std::string> names{"csda.attn.weight", "csda.attn.bias"};
    DifferentiableOp op{"csda_attend",
                        [names](const std::vector<Tensor>& in) {
                          return csda_attend(in[0], store_from(names, in, 1), kHeads);
                        },
                        [names](const std::vector<Tensor>& in, const Tensor& gy) {
                          ParamStore p = store_from(names, in, 1);
                          std::vector<Tensor> out{csda_attend_backward(in[0], p, kHeads, gy)};
                          append_grads(out, p, names);
                          return out;
                        }};
    return GradCheckCase{op,
                         {g.normal({kC, kHs, kWs, kStencilTaps, kNumScales}),
                          g.normal({kHeads * kAssembleTaps, kC}, 0.5),
                          g.normal({kHeads * kAssembleTaps}, 0.5)},
                         kBigProbes};
  });

  r.emplace_back("soft_flip_fuse", [](Gen& g) {
    const std::vector<std::string> names{"flip.weight", "flip.bias", "flip.offsets"};
    DifferentiableOp op{"soft_flip_fuse",
                        [names](const std::vector<Tensor>& in) {
                          return soft_flip_fuse(in[0], store_from(names, in, 1));
                        },
                        [names](const std::vector<Tensor>& in, const Tensor& gy) {
                          ParamStore p = store_from(names, in, 1);
                          std::vector<Tensor> out{soft_flip_fuse_backward(in[0], p, gy)};
                          append_grads(out, p, names);
                          return out;
                        }};
    const Tensor grid0({kHs, kWs, kStencilTaps, 2});
    return GradCheckCase{op,
                         {g.normal({kC, kHs, kWs}), g.normal({kC, kC, 3, 3}, 0.3),
                          g.normal({kC}, 0.1), g.safe_offsets(grid0)},
                         kBigProbes};
  });

  r.emplace_back("disentangle", [](Gen& g) {
    const std::vector<std::string> names{"seg.weight", "seg.bias"};
    DifferentiableOp op{
        "disentangle",
        [names](const std::vector<Tensor>& in) {
          Disentangled d = disentangle(in[0], in[1], store_from(names, in, 2));
          return flatten_all({d.horizontal, d.vertical, d.logits});
        },
        [names](const std::vector<Tensor>& in, const Tensor& gy) {
          ParamStore p = store_from(names, in, 2);
          const Shape map{kC, kHs, kWs};
          const auto parts = split_like(gy, {map, map, {kHs, kWs}});
          DisentangleGrads d = disentangle_backward(in[0], in[1], p, parts[0], parts[1], parts[2]);
          std::vector<Tensor> out{d.fused, d.assembled};
          append_grads(out, p, names);
          return out;
        }};
    return GradCheckCase{op,
                         {g.normal({kC, kHs, kWs}), g.normal({kC, kHs, kWs}),
                          g.normal({1, kC, 3, 3}, 0.3), g.normal({1}, 0.1)},
                         kBigProbes};
  });

  r.emplace_back("compress_vertical", [](Gen& g) {
    DifferentiableOp op{"compress_vertical",
                        [](const std::vector<Tensor>& in) {
                          PlaneSequences s = compress_vertical(in[0], in[1]);
                          return flatten_all({s.horizontal, s.vertical});
                        },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          const auto parts = split_like(gy, {{kWs, kC}, {kWs, kC}});
                          return std::vector<Tensor>{
                              compress_vertical_backward(in[0].shape(), parts[0]),
                              compress_vertical_backward(in[1].shape(), parts[1])};
                        }};
    return GradCheckCase{op, {g.normal({kC, kHs, kWs}), g.normal({kC, kHs, kWs})}, kBigProbes};
  });

  r.emplace_back("channel_graph_attend", [](Gen& g) {
    DifferentiableOp op{"channel_graph_attend",
                        [](const std::vector<Tensor>& in) {
                          return channel_graph_attend(in[0], in[1]);
                        },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          GraphGrads gg = channel_graph_attend_backward(in[0], in[1], gy);
                          return std::vector<Tensor>{gg.q, gg.weight};
                        }};
    return GradCheckCase{op, {g.normal({kWs, kC}), g.normal({kC, kC}, 0.35)}};
  });

  r.emplace_back("self_attend", [](Gen& g) {
    const auto names = attn_names("selfattn.h");
    DifferentiableOp op{"self_attend",
                        [names](const std::vector<Tensor>& in) {
                          return self_attend(in[0], store_from(names, in, 1), "selfattn.h");
                        },
                        [names](const std::vector<Tensor>& in, const Tensor& gy) {
                          ParamStore p = store_from(names, in, 1);
                          std::vector<Tensor> out{self_attend_backward(in[0], p, "selfattn.h", gy)};
                          append_grads(out, p, names);
                          return out;
                        }};
    std::vector<Tensor> in{g.normal({kWs, kC})};
    for (Tensor& t : attn_params(g)) in.push_back(std::move(t));
    return GradCheckCase{op, in};
  });

  r.emplace_back("cross_attend", [](Gen& g) {
    const auto names = attn_names("crossattn.hv");
    DifferentiableOp op{
        "cross_attend",
        [names](const std::vector<Tensor>& in) {
          return cross_attend(in[0], in[1], store_from(names, in, 2), "crossattn.hv");
        },
        [names](const std::vector<Tensor>& in, const Tensor& gy) {
          ParamStore p = store_from(names, in, 2);
          AttentionGrads a = cross_attend_backward(in[0], in[1], p, "crossattn.hv", gy);
          std::vector<Tensor> out{a.query_source, a.kv_source};
          append_grads(out, p, names);
          return out;
        }};
    std::vector<Tensor> in{g.normal({kWs, kC}), g.normal({kWs, kC})};
    for (Tensor& t : attn_params(g)) in.push_back(std::move(t));
    return GradCheckCase{op, in};
  });

  r.emplace_back("heads", [](Gen& g) {
    const std::vector<std::string> names{"head.depth.weight", "head.depth.bias",
                                         "head.height.weight", "head.height.bias"};
    DifferentiableOp op{"heads",
                        [names](const std::vector<Tensor>& in) {
                          Prediction pr = heads(in[0], in[1], store_from(names, in, 2));
                          return flatten_all({pr.horizon_depth, scalar(pr.room_height_m)});
                        },
                        [names](const std::vector<Tensor>& in, const Tensor& gy) {
                          ParamStore p = store_from(names, in, 2);
                          const auto parts = split_like(gy, {{kWs}, {1}});
                          HeadGrads h = heads_backward(in[0], in[1], p, parts[0], parts[1][0]);
                          std::vector<Tensor> out{h.q_vertical, h.q_horizontal};
                          append_grads(out, p, names);
                          return out;
                        }};
    return GradCheckCase{op,
                         {g.normal({kWs, kC}), g.normal({kWs, kC}), g.normal({kC}, 0.35),
                          g.normal({1}), g.normal({kC}, 0.35), g.normal({1})}};
  });

  r.emplace_back("bce_segment", [](Gen& g) {
    PlaneMask mask{g.uniform({kHs, kWs}, 0.0, 1.0)};
    for (double& v : mask.mask.data()) v = v < 0.5 ? 0.0 : 1.0;
    DifferentiableOp op{"bce_segment",
                        [mask](const std::vector<Tensor>& in) {
                          return scalar(bce_segment(in[0], mask));
                        },
                        [mask](const std::vector<Tensor>& in, const Tensor& gy) {
                          return std::vector<Tensor>{scale(bce_segment_backward(in[0], mask), gy[0])};
                        }};
    return GradCheckCase{op, {g.normal({kHs, kWs}, 3.0)}};
  });

  r.emplace_back("layout_loss", [](Gen& g) {
    const HorizonDepth gt{g.uniform({2 * kWs}, 1.5, 4.0), 2.9};
    auto terms = [](const LayoutLossTerms& t) {
      return Tensor({4}, {t.depth, t.height, t.normal, t.gradient});
    };
    DifferentiableOp op{"layout_loss",
                        [gt, terms](const std::vector<Tensor>& in) {
                          return terms(layout_loss({in[0], in[1][0]}, gt));
                        },
                        [gt](const std::vector<Tensor>& in, const Tensor& gy) {
                          LayoutLossGrads l = layout_loss_backward({in[0], in[1][0]}, gt,
                                                                   {gy[0], gy[1], gy[2], gy[3]});
                          return std::vector<Tensor>{l.depth, scalar(l.height)};
                        }};
    return GradCheckCase{op, {g.uniform({kWs}, 1.5, 4.0), scalar(g.uniform(2.5, 3.5))}};
  });

  r.emplace_back("depth_normals_gradients", [](Gen& g) {
    DifferentiableOp op{"depth_normals_gradients",
                        [](const std::vector<Tensor>& in) {
                          NormalsGradients n = depth_normals_gradients(in[0]);
                          return flatten_all({n.normals, n.gradients});
                        },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          const auto parts = split_like(gy, {{kWs}, {kWs}});
                          return std::vector<Tensor>{
                              depth_normals_gradients_backward(in[0], parts[0], parts[1])};
                        }};
    return GradCheckCase{op, {g.uniform({kWs}, 1.5, 4.0)}};
  });

  for (std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
    const std::string name = "conv3x3.stride" + std::to_string(stride);
    r.emplace_back(name, [name, stride](Gen& g) {
      DifferentiableOp op{name,
                          [stride](const std::vector<Tensor>& in) {
                            return conv3x3(in[0], in[1], in[2], stride);
                          },
                          [stride](const std::vector<Tensor>& in, const Tensor& gy) {
                            ConvGrads c = conv3x3_backward(in[0], in[1], stride, gy);
                            return std::vector<Tensor>{c.input, c.weight, c.bias};
                          }};
      return GradCheckCase{op,
                           {g.normal({3, kHs, kWs}), g.normal({4, 3, 3, 3}, 0.3), g.normal({4})}};
    });
  }

  r.emplace_back("avg_pool2", [](Gen& g) {
    DifferentiableOp op{"avg_pool2",
                        [](const std::vector<Tensor>& in) { return avg_pool2(in[0]); },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          return std::vector<Tensor>{avg_pool2_backward(in[0].shape(), gy)};
                        }};
    return GradCheckCase{op, {g.normal({3, kHs, kWs})}};
  });

  r.emplace_back("softmax", [](Gen& g) {
    DifferentiableOp op{"softmax",
                        [](const std::vector<Tensor>& in) { return softmax(in[0], 1); },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          return std::vector<Tensor>{softmax_backward(softmax(in[0], 1), 1, gy)};
                        }};
    return GradCheckCase{op, {g.normal({4, 9, 5}, 2.0)}};
  });

  r.emplace_back("matmul", [](Gen& g) {
    DifferentiableOp op{"matmul",
                        [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          BinaryGrads b = matmul_backward(in[0], in[1], gy);
                          return std::vector<Tensor>{b.a, b.b};
                        }};
    return GradCheckCase{op, {g.normal({5, 7}), g.normal({7, 3})}};
  });

  r.emplace_back("softplus", [](Gen& g) {
    DifferentiableOp op{"softplus",
                        [](const std::vector<Tensor>& in) { return softplus(in[0]); },
                        [](const std::vector<Tensor>& in, const Tensor& gy) {
                          return std::vector<Tensor>{softplus_backward(in[0], gy)};
                        }};
    return GradCheckCase{op, {g.normal({50}, 3.0)}};
  });

  r.emplace_back("backbone_stub", [](Gen& g) {
    std::vector<std::string> names;
    std::vector<Tensor> in{g.uniform({3, 64, 128}, 0.0, 1.0)};
    for (std::size_t l = 0; l < kNumScales; ++l) {
      const std::string prefix = "backbone.conv" + std::to_string(l + 1);
      const std::size_t c_in = l == 0 ? 3 : kC;
      names.push_back(prefix + ".weight");
      in.push_back(g.normal({kC, c_in, 3, 3}, 0.3));
      names.push_back(prefix + ".bias");
      in.push_back(g.normal({kC}, 0.1));
    }
    DifferentiableOp op{"backbone_stub",
                        [names](const std::vector<Tensor>& in) {
                          MultiScaleFeatures ms = backbone_stub(in[0], store_from(names, in, 1));
                          return flatten_all({ms.scales.begin(), ms.scales.end()});
                        },
                        [names](const std::vector<Tensor>& in, const Tensor& gy) {
                          ParamStore p = store_from(names, in, 1);
                          const MultiScaleFeatures ms = backbone_stub(in[0], p);
                          std::vector<Shape> shapes;
                          for (const Tensor& s : ms.scales) shapes.push_back(s.shape());
                          BackboneGrads bg;
                          const auto parts = split_like(gy, shapes);
                          for (std::size_t s = 0; s < kNumScales; ++s) bg.scales[s] = parts[s];
                          std::vector<Tensor> out{backbone_stub_backward(in[0], p, bg)};
                          append_grads(out, p, names);
                          return out;
                        }};
    return GradCheckCase{op, in, 64};
  });

  r.emplace_back("network.total_loss", [](Gen& g) {
    const ModelConfig cfg{kC, kHeads, 64, 128, 3};
    ParamStore init = init_params(cfg);
    init.value("csda.offsets") = g.safe_offsets(tangent_grid(cfg.reference_grid()));
    init.value("flip.offsets") = g.safe_offsets(init.value("flip.offsets"));
    std::vector<std::string> names;
    std::vector<Tensor> in;
    for (const auto& e : init.entries()) {
      names.push_back(e.name);
      in.push_back(e.value);
    }
    const EquirectGrid ref = cfg.reference_grid();
    Sample s{g.uniform({3, cfg.height, cfg.width}, 0.0, 1.0),
             PlaneMask{g.uniform({ref.height, ref.width}, 0.0, 1.0)},
             HorizonDepth{g.uniform({cfg.width}, 1.5, 4.0), 2.9}};
    for (double& v : s.mask.mask.data()) v = v < 0.5 ? 0.0 : 1.0;
    const std::vector<Sample> batch{s};
    DifferentiableOp op{"network.total_loss",
                        [names, cfg, batch](const std::vector<Tensor>& in) {
                          return scalar(batch_loss(batch, store_from(names, in, 0), cfg).total);
                        },
                        [names, cfg, batch](const std::vector<Tensor>& in, const Tensor& gy) {
                          ParamStore p = store_from(names, in, 0);
                          batch_loss_and_grad(batch, p, cfg);
                          std::vector<Tensor> out;
                          for (const auto& e : p.entries()) out.push_back(scale(e.grad, gy[0]));
                          return out;
                        }};
    return GradCheckCase{op, in, 16};
  });

  return r;
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names;
  for (const auto& [name, build] : registry()) names.push_back(name);
  return names;
}

std::vector<GradCheckCase> gradcheck_cases(const std::string& filter, std::uint64_t seed) {
  std::vector<GradCheckCase> out;
  std::size_t k = 0;
  for (const auto& [name, build] : registry()) {
    ++k;
    if (!filter.empty() && name.find(filter) == std::string::npos) continue;
    Gen g(seed * 1000003 + k);
    out.push_back(build(g));
  }
  return out;
}

std::vector<GradCheckReport> run_gradcheck_suite(const std::string& filter, double eps,
                                                 std::uint64_t seed) {
  const std::vector<GradCheckCase> cases = gradcheck_cases(filter, seed);
  if (cases.empty()) throw ValidationError("gradcheck: no operation matches '" + filter + "'");
  std::vector<GradCheckReport> reports;
  for (const GradCheckCase& c : cases) {
    reports.push_back(grad_check(c.op, c.inputs, eps, {.seed = seed, .max_probes = c.max_probes}));
  }
  return reports;
}

}  // namespace dopnet
