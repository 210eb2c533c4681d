#include "dopnet/pipeline.hpp"

#include <cmath>
#include <string>

#include "dopnet/image_io.hpp"
#include "dopnet/json_io.hpp"

namespace dopnet {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be finite and >= 0");
  if (heads == 0 || channels % heads != 0) {
    throw ValidationError("channels " + std::to_string(channels) + " not divisible by heads " +
                          std::to_string(heads));
  }
}

ModelConfig TrainConfig::model(std::size_t height, std::size_t width) const {
  ModelConfig m{channels, heads, height, width, seed};
  m.validate();
  return m;
}

Sample load_sample(const RoomFiles& files, std::size_t height, std::size_t width) {
  ModelConfig cfg;
  cfg.height = height;
  cfg.width = width;
  cfg.validate();
  Sample s;
  s.image = read_png(files.image);
  if (s.image.dim(1) != height || s.image.dim(2) != width) {
    throw ValidationError(files.image.string() + ": expected " + std::to_string(height) + "x" +
                          std::to_string(width) + ", got " + shape_str(s.image.shape()));
  }
  const Layout layout = layout_from_json(read_json_file(files.layout));
  s.mask = rasterize_plane_mask(layout, cfg.reference_grid());
  s.gt = horizon_depth_from_json(read_json_file(files.depth));
  return s;
}

std::vector<Sample> load_samples(const std::filesystem::path& dir) {
  const std::vector<RoomFiles> files = list_dataset(dir);
  const Tensor first = read_png(files.front().image);
  std::vector<Sample> out;
  for (const RoomFiles& f : files) out.push_back(load_sample(f, first.dim(1), first.dim(2)));
  return out;
}

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  cfg.validate();
  if (samples.empty()) throw ValidationError("train: no samples");
  const ModelConfig model = cfg.model(samples.front().image.dim(1), samples.front().image.dim(2));
  TrainResult r{init_params(model), {}};
  Adam adam(r.params, {.lr = cfg.lr});
  const std::size_t batch = std::min(samples.size(), kMaxBatch);

  auto record = [&](std::size_t step, const LossBreakdown& b) {
    if (!std::isfinite(b.total)) {
      throw NumericalError("train: loss is not finite at step " + std::to_string(step));
    }
    r.trace.push_back(b);
    if (on_step) on_step(step, b);
  };

  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    std::vector<Sample> chunk;
    for (std::size_t i = 0; i < batch; ++i) {
      chunk.push_back(samples[(step * batch + i) % samples.size()]);
    }
    try {
      if (step == cfg.steps) {
        record(step, batch_loss(chunk, r.params, model));
        break;
      }
      r.params.zero_grad();
      record(step, batch_loss_and_grad(chunk, r.params, model));
      adam.step(r.params);
    } catch (const NumericalError& e) {
      const std::string what = e.what();
      if (what.rfind("train:", 0) == 0) throw;
      throw NumericalError("train: diverged at step " + std::to_string(step) + ": " + what);
    }
  }
  return r;
}

ModelConfig config_from_params(const ParamStore& p, std::size_t height, std::size_t width) {
  if (!p.contains("backbone.conv1.weight") || !p.contains("csda.attn.weight")) {
    throw ValidationError("weights: not a network weight file");
  }
  ModelConfig cfg;
  cfg.channels = p.value("backbone.conv1.weight").dim(0);
  cfg.heads = p.value("csda.attn.weight").dim(0) / kAssembleTaps;
  cfg.height = height;
  cfg.width = width;
  check_params(p, cfg);
  return cfg;
}

Prediction infer(const ParamStore& p, const Tensor& image) {
  if (image.ndim() != 3) throw ValidationError("infer: image must be [3,H,W]");
  const ModelConfig cfg = config_from_params(p, image.dim(1), image.dim(2));
  return forward(image, p, cfg).pred;
}

}  // namespace dopnet
