#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivra/io.hpp"
#include "ivra/pipeline.hpp"
#include "ivra/scenes.hpp"

namespace ivra {

// Sweep axes for the ablation harness. Every axis must carry at least one
// value; the Cartesian product defines the cells.
struct AblationAxes {
  std::vector<double> lambdas;
  std::vector<std::vector<std::size_t>> layer_sets;
  std::vector<HookPosition> positions;
  std::vector<ClipMode> clips;
  std::vector<std::uint64_t> seeds;
};

// Scene shape used for every trial; the seed axis varies the layout,
// prototypes and noise.
struct AblationSceneParams {
  std::size_t grid_h = 16;
  std::size_t grid_w = 16;
  std::size_t num_objects = 3;
  std::size_t d = 32;
  float noise_sigma = 0.3f;
};

// "5" or "4+5": CSV-safe rendering of a layer set.
std::string format_layer_set(const std::vector<std::size_t>& layers);

// Runs sharpening_trial for every cell and seed, in deterministic nested
// order (lambda, layers, position, clip, seed), one row per trial with
// metric "contrast_delta" = contrast_after - contrast_before. The trial
// operates on patch embeddings directly, so the layers/position columns
// record the swept tags without changing the metric; lambda and clip do.
std::vector<AblationRow> run_ablation(const AblationAxes& axes,
                                      const AblationSceneParams& scene);

}  // namespace ivra
