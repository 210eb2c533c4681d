#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dopnet/commands.hpp"
#include "dopnet/image_io.hpp"
#include "dopnet/json_io.hpp"
#include "dopnet/model.hpp"
#include "dopnet/pipeline.hpp"
#include "dopnet/scene.hpp"

using namespace dopnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dopnet_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SceneSpec small_spec(std::uint64_t seed, std::size_t rooms, std::size_t corners) {
  SceneSpec s;
  s.seed = seed;
  s.n_rooms = rooms;
  s.corners = corners;
  s.grid = EquirectGrid(64, 128);
  s.min_wall_columns = 2.0;
  return s;
}

std::string error_of(const Json& j) {
  try {
    layout_from_json(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Scene, SpecValidation) {
  SceneSpec s;
  s.corners = 5;
  EXPECT_THROW(s.validate(), ValidationError);
  s.corners = 14;
  EXPECT_THROW(s.validate(), ValidationError);
  s.corners = 12;
  EXPECT_NO_THROW(s.validate());
}

TEST(Scene, RoomsAreManhattanWithRequestedCorners) {
  std::mt19937_64 rng(3);
  SceneSpec s;
  for (std::size_t k : {4u, 6u, 8u, 10u, 12u}) {
    s.corners = k;
    for (int i = 0; i < 5; ++i) {
      const Layout l = random_manhattan_room(rng, s);
      const auto& p = l.floor_polygon();
      ASSERT_EQ(p.size(), k);
      for (std::size_t v = 0; v < k; ++v) {
        const Point2 e = p[(v + 1) % k] - p[v];
        EXPECT_TRUE(std::abs(e.x) < 1e-12 || std::abs(e.z) < 1e-12);
      }
      EXPECT_GE(l.room_height(), s.min_height_m);
      EXPECT_LE(l.room_height(), s.max_height_m);
    }
  }
}

TEST(Gen, DeterministicPerSeed) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  generate_dataset(small_spec(7, 2, 6), a);
  generate_dataset(small_spec(7, 2, 6), b);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 8u);
  const fs::path c = scratch("gen_c");
  generate_dataset(small_spec(8, 2, 6), c);
  EXPECT_NE(slurp(a / "room_0000.layout.json"), slurp(c / "room_0000.layout.json"));
}

TEST(Gen, CuboidsMatchAnalyticDepth) {
  const fs::path d = scratch("gen_cuboid");
  const auto rooms = generate_dataset(small_spec(1, 4, 4), d);
  ASSERT_EQ(rooms.size(), 4u);
  for (const RoomFiles& f : rooms) {
    const Layout l = layout_from_json(read_json_file(f.layout));
    const HorizonDepth hd = horizon_depth_from_json(read_json_file(f.depth));
    double x0 = 1e9, x1 = -1e9, z0 = 1e9, z1 = -1e9;
    for (const Point2& p : l.floor_polygon()) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), z0 = std::min(z0, p.z), z1 = std::max(z1, p.z);
    }
    const std::size_t W = hd.depth.size();
    for (std::size_t j = 0; j < W; ++j) {
      const double u = column_longitude(j, W), s = std::sin(u), c = std::cos(u);
      const double tx = s > 0 ? x1 / s : x0 / s, tz = c > 0 ? z1 / c : z0 / c;
      EXPECT_NEAR(hd.depth[j], std::min(tx, tz), 1e-9);
    }
    EXPECT_DOUBLE_EQ(hd.room_height_m, l.room_height());
  }
}

TEST(Gen, MaskMatchesRasterizedLayout) {
  const fs::path d = scratch("gen_mask");
  const auto rooms = generate_dataset(small_spec(2, 2, 8), d);
  for (const RoomFiles& f : rooms) {
    const Layout l = layout_from_json(read_json_file(f.layout));
    const Tensor png = read_png(f.mask, true);
    const Tensor m = rasterize_plane_mask(l, EquirectGrid(64, 128)).mask;
    EXPECT_EQ(png.reshaped(m.shape()).vec(), m.vec());
  }
}

TEST(Json, LayoutRoundTrip) {
  const Layout l({{-1, -2}, {3, -2}, {3, 1}, {-1, 1}}, 2.9, 1.5);
  const Layout back = layout_from_json(layout_to_json(l));
  EXPECT_EQ(back.floor_polygon().size(), 4u);
  EXPECT_DOUBLE_EQ(back.room_height(), 2.9);
  EXPECT_DOUBLE_EQ(back.camera_height(), 1.5);
}

TEST(Json, SchemaErrorsNameTheField) {
  Json good = layout_to_json(Layout({{-1, -2}, {3, -2}, {3, 1}, {-1, 1}}, 2.9));
  Json j = good;
  j.erase("room_height_m");
  EXPECT_NE(error_of(j).find("room_height_m"), std::string::npos);
  j = good;
  j["floor_polygon"][2][1] = "x";
  EXPECT_NE(error_of(j).find("floor_polygon[2][1]"), std::string::npos) << error_of(j);
  j = good;
  j["extra"] = 1;
  EXPECT_NE(error_of(j).find("extra"), std::string::npos);
  j = good;
  j["floor_polygon"] = Json::array({Json::array({0, 0})});
  EXPECT_FALSE(error_of(j).empty());
  EXPECT_THROW(prediction_from_json(Json{{"horizon_depth", Json::array({1.0, -1.0})}, {"room_height_m", 3.0}}),
               ValidationError);
}

TEST(Json, MetricKeys) {
  MetricReport r;
  const Json j = metric_report_to_json(r);
  for (const char* k : {"2DIoU", "3DIoU", "CE", "PE", "RMSE", "delta_1.25"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["CE"].is_null());
}

TEST(Json, LossBreakdownLine) {
  const Json j = loss_breakdown_to_json(total_loss(0.5, {0.1, 0.2, 0.3, 0.4}), 7);
  EXPECT_EQ(j["step"], 7);
  EXPECT_DOUBLE_EQ(j["total"].get<double>(), 0.75 * 0.5 + 1.0);
  EXPECT_DOUBLE_EQ(j["lambda"].get<double>(), 0.75);
}

TEST(Png, RoundTripQuantized) {
  const fs::path d = scratch("png");
  Tensor img({3, 4, 8});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i % 256) / 255.0;
  write_png(d / "a.png", img);
  EXPECT_LT(max_abs_diff(read_png(d / "a.png"), img), 1e-12);
  EXPECT_THROW(read_png(d / "missing.png"), ValidationError);
}

TEST(Model, ConfigValidation) {
  EXPECT_THROW((ModelConfig{8, 3, 64, 128, 0}.validate()), ValidationError);
  EXPECT_THROW((ModelConfig{8, 2, 48, 96, 0}.validate()), ValidationError);
  EXPECT_THROW((ModelConfig{8, 2, 64, 64, 0}.validate()), ValidationError);
  EXPECT_NO_THROW((ModelConfig{8, 2, 64, 128, 0}.validate()));
}

TEST(Model, ForwardShapesAndInitialHeads) {
  const ModelConfig cfg{8, 2, 64, 128, 0};
  const ParamStore p = init_params(cfg);
  check_params(p, cfg);
  EXPECT_TRUE(p.value("csda.offsets").vec() == std::vector<double>(p.value("csda.offsets").size(), 0.0));
  const ForwardCache c = forward(Tensor({3, 64, 128}, 0.5), p, cfg);
  EXPECT_EQ(c.pred.horizon_depth.shape(), (Shape{8}));
  EXPECT_EQ(c.planes.logits.shape(), (Shape{4, 8}));
  // A mid-grey image standardizes to zero, so every feature is zero.
  for (double d : c.pred.horizon_depth.data()) EXPECT_NEAR(d, 1.0, 1e-12);
  EXPECT_NEAR(c.pred.room_height_m, 1.0, 1e-12);
}

TEST(Model, SeedDeterminesWeights) {
  const ParamStore a = init_params({8, 2, 64, 128, 4}), b = init_params({8, 2, 64, 128, 4});
  const ParamStore c = init_params({8, 2, 64, 128, 5});
  EXPECT_EQ(encode_dopw(a), encode_dopw(b));
  EXPECT_NE(encode_dopw(a), encode_dopw(c));
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
  const fs::path d = scratch("train_lr0");
  generate_dataset(small_spec(3, 2, 4), d);
  TrainConfig cfg;
  cfg.steps = 4;
  cfg.lr = 0.0;
  const TrainResult r = train(load_samples(d), cfg);
  ASSERT_EQ(r.trace.size(), 5u);
  for (const LossBreakdown& b : r.trace) EXPECT_EQ(b.total, r.trace.front().total);
  cfg.lr = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Train, SameSeedSameTrace) {
  const fs::path d = scratch("train_det");
  generate_dataset(small_spec(4, 1, 6), d);
  const std::vector<Sample> s = load_samples(d);
  TrainConfig cfg;
  cfg.steps = 5;
  const TrainResult a = train(s, cfg), b = train(s, cfg);
  ASSERT_EQ(a.trace.size(), 6u);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].total, b.trace[i].total);
    EXPECT_NEAR(a.trace[i].total, 0.75 * a.trace[i].segment + a.trace[i].layout(), 1e-12);
  }
  EXPECT_EQ(encode_dopw(a.params), encode_dopw(b.params));
  EXPECT_LT(a.trace.back().total, a.trace.front().total);
}

TEST(Train, DivergenceNamesTheStep) {
  const fs::path d = scratch("train_nan");
  generate_dataset(small_spec(5, 1, 4), d);
  std::vector<Sample> s = load_samples(d);
  s[0].image[0] = std::nan("");
  TrainConfig cfg;
  cfg.steps = 2;
  try {
    train(s, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Commands, TrainInferEval) {
  const fs::path d = scratch("cmd");
  run_gen(small_spec(6, 1, 4), d / "data");
  TrainConfig cfg;
  cfg.steps = 3;
  std::ostringstream trace;
  const TrainResult r = run_train(d / "data", cfg, d / "w.dopw", trace);
  std::istringstream lines(trace.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const Json j = Json::parse(line);
    EXPECT_EQ(j["step"].get<std::size_t>(), n);
    ++n;
  }
  EXPECT_EQ(n, 4u);

  const Prediction p = run_infer(d / "w.dopw", d / "data" / "room_0000.png", d / "p.json");
  EXPECT_EQ(p.horizon_depth.size(), 8u);
  const Prediction again = infer(r.params, read_png(d / "data" / "room_0000.png"));
  EXPECT_LT(max_abs_diff(p.horizon_depth, again.horizon_depth), 1e-4);  // f32 weights

  const Json perfect = run_eval((d / "data" / "*.layout.json").string(), (d / "data" / "*.layout.json").string(),
                                EquirectGrid(512, 1024), d / "r.json");
  EXPECT_EQ(perfect["mean"]["2DIoU"].get<double>(), 1.0);
  EXPECT_EQ(perfect["mean"]["CE"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(d / "r.json"));

  const Json scored = run_eval((d / "p.json").string(), (d / "data" / "room_0000.layout.json").string(),
                               EquirectGrid(64, 128), std::nullopt);
  EXPECT_EQ(scored["pairs"].size(), 1u);
  EXPECT_LT(scored["mean"]["2DIoU"].get<double>(), 1.0);

  EXPECT_THROW(run_eval((d / "none*.json").string(), (d / "p.json").string(), EquirectGrid(64, 128), std::nullopt),
               ValidationError);

  run_render(d / "data" / "room_0000.layout.json", d / "p.json", std::nullopt, EquirectGrid(64, 128), d / "o.png");
  const Tensor o = read_png(d / "o.png");
  EXPECT_EQ(o.shape(), (Shape{3, 64, 192}));
}

TEST(Commands, GradcheckFilter) {
  std::ostringstream os;
  EXPECT_EQ(run_gradcheck("softmax", 1e-4, 0, os), 0u);
  EXPECT_NE(os.str().find("softmax"), std::string::npos);
  EXPECT_THROW(run_gradcheck("no_such_op", 1e-4, 0, os), ValidationError);
}
