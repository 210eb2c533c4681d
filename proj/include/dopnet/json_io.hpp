#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "dopnet/layout.hpp"
#include "dopnet/losses.hpp"
#include "dopnet/metrics.hpp"

// JSON schemas. All fields are required and unknown fields are rejected;
// errors name the offending field path.
//
//   Layout:      {"floor_polygon": [[x, z], ...], "room_height_m": h, "camera_height_m": c}
//   Prediction:  {"horizon_depth": [d, ...], "room_height_m": h}
//   HorizonDepth uses the Prediction schema.

namespace dopnet {

using Json = nlohmann::ordered_json;

Json layout_to_json(const Layout& layout);
Layout layout_from_json(const Json& j);

Json prediction_to_json(const Prediction& pred);
Prediction prediction_from_json(const Json& j);

Json horizon_depth_to_json(const HorizonDepth& hd);
HorizonDepth horizon_depth_from_json(const Json& j);

/// Keys "2DIoU", "3DIoU", "CE" (null when unavailable), "PE", "RMSE", "delta_1.25".
Json metric_report_to_json(const MetricReport& r);
Json loss_breakdown_to_json(const LossBreakdown& b, std::size_t step);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace dopnet
