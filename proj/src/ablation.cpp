#include "ivra/ablation.hpp"

#include <sstream>

#include "ivra/matrix.hpp"

namespace ivra {

std::string format_layer_set(const std::vector<std::size_t>& layers) {
  std::ostringstream out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0) out << '+';
    out << layers[i];
  }
  return out.str();
}

std::vector<AblationRow> run_ablation(const AblationAxes& axes,
                                      const AblationSceneParams& scene) {
  if (axes.lambdas.empty() || axes.layer_sets.empty() ||
      axes.positions.empty() || axes.clips.empty() || axes.seeds.empty()) {
    throw ValueError("run_ablation: every sweep axis needs at least one value");
  }
  for (double lam : axes.lambdas) {
    if (!(lam >= 0.0 && lam <= 1.0)) {
      throw ValueError("run_ablation: lambda values must lie in [0, 1]");
    }
  }

  std::vector<AblationRow> rows;
  rows.reserve(axes.lambdas.size() * axes.layer_sets.size() *
               axes.positions.size() * axes.clips.size() * axes.seeds.size());
  for (double lam : axes.lambdas) {
    for (const auto& layers : axes.layer_sets) {
      for (HookPosition position : axes.positions) {
        for (ClipMode clip : axes.clips) {
          for (std::uint64_t seed : axes.seeds) {
            SceneSpec spec =
                random_scene_spec(scene.grid_h, scene.grid_w,
                                  scene.num_objects, scene.d,
                                  scene.noise_sigma, seed);
            auto [before, after] = sharpening_trial(
                spec, MixCoefficient(static_cast<float>(lam)), clip);
            AblationRow row;
            row.lambda = lam;
            row.layers = format_layer_set(layers);
            row.position = to_string(position);
            row.clip = to_string(clip);
            row.metric = "contrast_delta";
            row.value = after - before;
            row.seed = seed;
            rows.push_back(row);
          }
        }
      }
    }
  }
  return rows;
}

}  // namespace ivra
