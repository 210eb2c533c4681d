// dopnet: dataset generation, training, inference, evaluation, gradient
// checks and overlay rendering.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "dopnet/commands.hpp"
#include "dopnet/gradcheck_suite.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace dopnet;
  CLI::App app{"Horizon-depth room layout network: data, training and evaluation tools"};
  app.require_subcommand(1);

  SceneSpec spec;
  std::string gen_size = "256x512", gen_out;
  auto* gen = app.add_subcommand("gen", "Generate synthetic Manhattan rooms");
  gen->add_option("--rooms", spec.n_rooms, "Number of rooms")->default_val(1);
  gen->add_option("--corners", spec.corners, "Corners per room (even, 4..12)")->default_val(4);
  gen->add_option("--seed", spec.seed, "Random seed")->default_val(0);
  gen->add_option("--size", gen_size, "Panorama size HxW")->default_val("256x512");
  gen->add_option("--out", gen_out, "Output directory")->required();

  TrainConfig tcfg;
  std::string data_dir, weights_out, trace_path;
  auto* tr = app.add_subcommand("train", "Overfit the network on a generated dataset");
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--steps", tcfg.steps, "Optimizer steps")->default_val(500);
  tr->add_option("--lr", tcfg.lr, "Learning rate")->default_val(1e-4);
  tr->add_option("--channels", tcfg.channels, "Feature channels C")->default_val(8);
  tr->add_option("--heads", tcfg.heads, "Attention heads L")->default_val(2);
  tr->add_option("--seed", tcfg.seed, "Initialization seed")->default_val(0);
  tr->add_option("--out", weights_out, "Output weights (.dopw)")->required();
  tr->add_option("--trace", trace_path, "JSON-lines loss trace (default stdout)");

  std::string inf_weights, inf_image, inf_out;
  auto* inf = app.add_subcommand("infer", "Predict horizon depth for one panorama");
  inf->add_option("--weights", inf_weights, "Weights (.dopw)")->required();
  inf->add_option("--image", inf_image, "Input PNG")->required();
  inf->add_option("--out", inf_out, "Output prediction JSON")->required();

  std::string pred_glob, gt_glob, eval_out, eval_size = "512x1024";
  auto* ev = app.add_subcommand("eval", "Score prediction/ground-truth file pairs");
  ev->add_option("--pred", pred_glob, "Prediction or layout files (glob)")->required();
  ev->add_option("--gt", gt_glob, "Ground-truth layout files (glob)")->required();
  ev->add_option("--out", eval_out, "Report JSON (default stdout)");
  ev->add_option("--size", eval_size, "Evaluation grid HxW")->default_val("512x1024");

  std::string gc_op;
  double gc_eps = kGradEps;
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  gc->add_option("--op", gc_op, "Substring filter on operation names");
  gc->add_option("--eps", gc_eps, "Central-difference step")->default_val(kGradEps);
  gc->add_option("--seed", gc_seed, "Input seed")->default_val(0);

  std::string r_layout, r_pred, r_image, r_out, r_size = "512x1024";
  auto* rd = app.add_subcommand("render", "Draw boundaries and floor plan to a PNG");
  rd->add_option("--layout", r_layout, "Ground-truth layout JSON")->required();
  rd->add_option("--pred", r_pred, "Prediction JSON");
  rd->add_option("--image", r_image, "Background panorama PNG");
  rd->add_option("--size", r_size, "Panorama size HxW")->default_val("512x1024");
  rd->add_option("--out", r_out, "Output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) {
      spec.grid = EquirectGrid::parse(gen_size);
      run_gen(spec, gen_out);
    } else if (*tr) {
      if (trace_path.empty()) {
        run_train(data_dir, tcfg, weights_out, std::cout);
      } else {
        std::ofstream trace(trace_path);
        if (!trace) throw ValidationError("cannot write " + trace_path);
        run_train(data_dir, tcfg, weights_out, trace);
      }
    } else if (*inf) {
      run_infer(inf_weights, inf_image, inf_out);
    } else if (*ev) {
      std::optional<std::filesystem::path> out;
      if (!eval_out.empty()) out = eval_out;
      const Json report = run_eval(pred_glob, gt_glob, EquirectGrid::parse(eval_size), out);
      if (!out) std::cout << report.dump(2) << '\n';
    } else if (*gc) {
      const std::size_t failed = run_gradcheck(gc_op, gc_eps, gc_seed, std::cout);
      if (failed > 0) {
        std::cerr << failed << " operation(s) above tolerance " << kGradTolerance << '\n';
        return kExitNumerical;
      }
    } else if (*rd) {
      std::optional<std::filesystem::path> pred, image;
      if (!r_pred.empty()) pred = r_pred;
      if (!r_image.empty()) image = r_image;
      run_render(r_layout, pred, image, EquirectGrid::parse(r_size), r_out);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
