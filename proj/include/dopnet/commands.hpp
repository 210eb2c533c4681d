#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dopnet/json_io.hpp"
#include "dopnet/pipeline.hpp"
#include "dopnet/scene.hpp"

// Bodies of the command-line subcommands. Errors surface as
// ValidationError (exit 1) or NumericalError (exit 2).

namespace dopnet {

/// Sorted matches of a shell glob; throws ValidationError when empty.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

/// Reads a Layout JSON, or a Prediction JSON converted to a layout by
/// tracing its depths and recovering the wall corners.
Layout load_layout_any(const std::filesystem::path& path);

void run_gen(const SceneSpec& spec, const std::filesystem::path& out_dir);

/// Writes one LossBreakdown JSON object per line to `trace`.
TrainResult run_train(const std::filesystem::path& data_dir, const TrainConfig& cfg,
                      const std::filesystem::path& weights_out, std::ostream& trace);

Prediction run_infer(const std::filesystem::path& weights, const std::filesystem::path& image,
                     const std::filesystem::path& out);

/// Pairs the sorted matches of both globs. Result:
/// {"pairs": [{"pred", "gt", metrics...}], "mean": {metrics...}}.
Json run_eval(const std::string& pred_glob, const std::string& gt_glob, const EquirectGrid& grid,
              const std::optional<std::filesystem::path>& out);

/// Prints one line per operation; returns the number of failing ones.
std::size_t run_gradcheck(const std::string& filter, double eps, std::uint64_t seed,
                          std::ostream& os);

void run_render(const std::filesystem::path& layout, const std::optional<std::filesystem::path>& pred,
                const std::optional<std::filesystem::path>& image, const EquirectGrid& grid,
                const std::filesystem::path& out);

}  // namespace dopnet
