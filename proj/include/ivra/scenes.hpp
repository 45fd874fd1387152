#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "ivra/affinity.hpp"

namespace ivra {

// Axis-aligned rectangle of grid cells carrying one object id (ids >= 1;
// 0 is reserved for the background).
struct ObjectRect {
  std::size_t id = 1;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 1;
  std::size_t width = 1;
};

// Planted-cluster scene: every cell gets a per-id prototype plus gaussian
// noise. Overlapping rectangles resolve later-object-wins; uncovered cells
// are background (id 0).
struct SceneSpec {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<ObjectRect> objects;
  std::size_t d = 0;
  float noise_sigma = 0.0f;
  std::uint64_t prototype_seed = 0;
  std::uint64_t noise_seed = 0;

  // Throws if a rectangle is degenerate, lies outside the grid, or uses
  // the background id.
  void validate() const;
};

// Patch embeddings plus the ground-truth object id of every patch.
struct LabeledPatches {
  PatchEmbeddings patches;
  std::vector<std::size_t> labels;
};

// Grid labels implied by the spec alone (later-object-wins), row-major.
std::vector<std::size_t> scene_labels(const SceneSpec& spec);

// Unit prototypes per id with pairwise cosine <= 0.5 (bounded rejection),
// then per-cell embedding = normalize(prototype[label] + sigma * gaussian).
// Deterministic in (prototype_seed, noise_seed). Errors if rejection fails
// (d too small for the id count) or an object id ends up fully occluded.
LabeledPatches generate_scene(const SceneSpec& spec);

// Mean same-label affinity (i != j) minus mean cross-label affinity.
// Errors unless both pair classes are nonempty.
double affinity_contrast(const AffinityMap& a,
                         const std::vector<std::size_t>& labels);

// Generates the scene, measures contrast before and after applying the
// intervention to the patch embeddings themselves (affinity recomputed from
// the mixed embeddings), and returns {before, after}.
std::pair<double, double> sharpening_trial(const SceneSpec& spec,
                                           MixCoefficient lam,
                                           ClipMode clip = ClipMode::relu);

// Deterministic random scene layout: `num_objects` rectangles with ids
// 1..num_objects, sizes in [grid/8, grid/2], redrawn (bounded) until no id
// is fully occluded. The same seed salts the prototype and noise streams
// differently.
SceneSpec random_scene_spec(std::size_t grid_h, std::size_t grid_w,
                            std::size_t num_objects, std::size_t d,
                            float noise_sigma, std::uint64_t seed);

// Renders the scene as a grayscale image (one patch_size x patch_size tile
// per cell): each id maps to a distinct base intensity with per-pixel
// seeded variation, so encoder patches of the same object look alike
// without being identical.
Matrix2D render_scene_image(const SceneSpec& spec, std::size_t patch_size);

}  // namespace ivra
