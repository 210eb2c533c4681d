#include "dopnet/commands.hpp"

#include <glob.h>

#include <cstdio>

#include "dopnet/gradcheck_suite.hpp"
#include "dopnet/image_io.hpp"
#include "dopnet/metrics.hpp"
#include "dopnet/render.hpp"

namespace dopnet {

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::filesystem::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (out.empty()) throw ValidationError("no files match " + pattern);
  std::sort(out.begin(), out.end());
  return out;
}

Layout load_layout_any(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  try {
    if (j.is_object() && j.contains("floor_polygon")) return layout_from_json(j);
    const Prediction pred = prediction_from_json(j);
    return extract_corners(layout_from_prediction(pred));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void run_gen(const SceneSpec& spec, const std::filesystem::path& out_dir) {
  generate_dataset(spec, out_dir);
}

TrainResult run_train(const std::filesystem::path& data_dir, const TrainConfig& cfg,
                      const std::filesystem::path& weights_out, std::ostream& trace) {
  const std::vector<Sample> samples = load_samples(data_dir);
  TrainResult r = train(samples, cfg, [&](std::size_t step, const LossBreakdown& b) {
    trace << loss_breakdown_to_json(b, step).dump() << '\n';
  });
  save_dopw(r.params, weights_out);
  return r;
}

Prediction run_infer(const std::filesystem::path& weights, const std::filesystem::path& image,
                     const std::filesystem::path& out) {
  const ParamStore p = load_dopw(weights);
  const Prediction pred = infer(p, read_png(image));
  write_json_file(out, prediction_to_json(pred));
  return pred;
}

Json run_eval(const std::string& pred_glob, const std::string& gt_glob, const EquirectGrid& grid,
              const std::optional<std::filesystem::path>& out) {
  const auto preds = expand_glob(pred_glob);
  const auto gts = expand_glob(gt_glob);
  if (preds.size() != gts.size()) {
    throw ValidationError("eval: " + std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(gts.size()) + " ground-truth files");
  }
  Json pairs = Json::array();
  std::vector<MetricReport> reports;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const MetricReport r = evaluate(load_layout_any(preds[i]), load_layout_any(gts[i]), grid);
    Json row{{"pred", preds[i].string()}, {"gt", gts[i].string()}};
    row.update(metric_report_to_json(r));
    pairs.push_back(std::move(row));
    reports.push_back(r);
  }
  Json result{{"pairs", pairs}, {"mean", metric_report_to_json(mean_report(reports))}};
  if (out) write_json_file(*out, result);
  return result;
}

std::size_t run_gradcheck(const std::string& filter, double eps, std::uint64_t seed,
                          std::ostream& os) {
  std::size_t failed = 0;
  for (const GradCheckReport& r : run_gradcheck_suite(filter, eps, seed)) {
    const bool ok = r.max_rel_err <= kGradTolerance;
    failed += !ok;
    char line[256];
    std::snprintf(line, sizeof line, "%-26s max_rel_err %.3e  probes %6zu  %s", r.op_name.c_str(),
                  r.max_rel_err, r.probes, ok ? "ok" : "FAIL");
    os << line << '\n';
  }
  return failed;
}

void run_render(const std::filesystem::path& layout, const std::optional<std::filesystem::path>& pred,
                const std::optional<std::filesystem::path>& image, const EquirectGrid& grid,
                const std::filesystem::path& out) {
  const Layout gt = layout_from_json(read_json_file(layout));
  std::optional<Prediction> p;
  if (pred) p = prediction_from_json(read_json_file(*pred));
  std::optional<Tensor> bg;
  if (image) bg = read_png(*image);
  write_png(out, render_overlay(gt, p, grid, bg ? &*bg : nullptr));
}

}  // namespace dopnet
