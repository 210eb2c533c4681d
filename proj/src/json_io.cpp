#include "dopnet/json_io.hpp"

#include <fstream>
#include <initializer_list>

namespace dopnet {
namespace {

void require_object(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + ": expected a JSON object");
  for (const char* k : keys) {
    if (!j.contains(k)) throw ValidationError(std::string(what) + "." + k + ": missing field");
  }
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ValidationError(std::string(what) + "." + k + ": unknown field");
  }
}

double number_at(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + ": expected a number");
  return j.get<double>();
}

Tensor number_array(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ValidationError(path + ": expected a non-empty array");
  Tensor t({j.size()});
  for (std::size_t i = 0; i < j.size(); ++i) {
    t[i] = number_at(j[i], path + "[" + std::to_string(i) + "]");
  }
  return t;
}

Json to_array(const Tensor& t) {
  Json a = Json::array();
  for (double v : t.data()) a.push_back(v);
  return a;
}

}  // namespace

Json layout_to_json(const Layout& layout) {
  Json poly = Json::array();
  for (const Point2& p : layout.floor_polygon()) poly.push_back({p.x, p.z});
  return Json{{"floor_polygon", poly},
              {"room_height_m", layout.room_height()},
              {"camera_height_m", layout.camera_height()}};
}

Layout layout_from_json(const Json& j) {
  require_object(j, {"floor_polygon", "room_height_m", "camera_height_m"}, "layout");
  const Json& poly = j["floor_polygon"];
  if (!poly.is_array()) throw ValidationError("layout.floor_polygon: expected an array");
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const std::string path = "layout.floor_polygon[" + std::to_string(i) + "]";
    if (!poly[i].is_array() || poly[i].size() != 2) {
      throw ValidationError(path + ": expected [x, z]");
    }
    pts.push_back({number_at(poly[i][0], path + "[0]"), number_at(poly[i][1], path + "[1]")});
  }
  return Layout(std::move(pts), number_at(j["room_height_m"], "layout.room_height_m"),
                number_at(j["camera_height_m"], "layout.camera_height_m"));
}

Json prediction_to_json(const Prediction& pred) {
  return Json{{"horizon_depth", to_array(pred.horizon_depth)},
              {"room_height_m", pred.room_height_m}};
}

Prediction prediction_from_json(const Json& j) {
  require_object(j, {"horizon_depth", "room_height_m"}, "prediction");
  Prediction p{number_array(j["horizon_depth"], "prediction.horizon_depth"),
               number_at(j["room_height_m"], "prediction.room_height_m")};
  for (std::size_t i = 0; i < p.horizon_depth.size(); ++i) {
    if (!(p.horizon_depth[i] > 0.0)) {
      throw ValidationError("prediction.horizon_depth[" + std::to_string(i) +
                            "]: must be positive");
    }
  }
  if (!(p.room_height_m > 0.0)) throw ValidationError("prediction.room_height_m: must be positive");
  return p;
}

Json horizon_depth_to_json(const HorizonDepth& hd) {
  return prediction_to_json({hd.depth, hd.room_height_m});
}

HorizonDepth horizon_depth_from_json(const Json& j) {
  Prediction p = prediction_from_json(j);
  return {std::move(p.horizon_depth), p.room_height_m};
}

Json metric_report_to_json(const MetricReport& r) {
  return Json{{"2DIoU", r.iou2d},
              {"3DIoU", r.iou3d},
              {"CE", r.ce_pct ? Json(*r.ce_pct) : Json(nullptr)},
              {"PE", r.pe_pct},
              {"RMSE", r.rmse},
              {"delta_1.25", r.delta1}};
}

Json loss_breakdown_to_json(const LossBreakdown& b, std::size_t step) {
  return Json{{"step", step},
              {"total", b.total},
              {"segment", b.segment},
              {"layout_depth", b.layout_depth},
              {"layout_height", b.layout_height},
              {"layout_normal", b.layout_normal},
              {"layout_gradient", b.layout_gradient},
              {"lambda", b.lambda}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace dopnet
