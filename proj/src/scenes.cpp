#include "ivra/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "ivra/rng.hpp"

namespace ivra {

namespace {

// Stream salts so one user seed can feed several independent generators.
constexpr std::uint64_t kLayoutSalt = 0x6c62272e07bb0142ull;
constexpr std::uint64_t kNoiseSalt = 0x517cc1b727220a95ull;
constexpr std::uint64_t kPixelSalt = 0x2545f4914f6cdd1dull;

constexpr int kPrototypeAttempts = 1000;
constexpr int kLayoutAttempts = 100;

std::vector<float> unit_gaussian(SeededRng& rng, std::size_t d) {
  std::vector<float> v(d);
  double norm_sq = 0.0;
  for (auto& x : v) {
    x = rng.gaussian();
    norm_sq += static_cast<double>(x) * x;
  }
  const double norm = std::sqrt(norm_sq);
  for (auto& x : v) x = static_cast<float>(x / norm);
  return v;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// Unit prototypes for the given ids (ascending), pairwise cosine <= 0.5.
std::map<std::size_t, std::vector<float>> draw_prototypes(
    const std::set<std::size_t>& ids, std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  std::map<std::size_t, std::vector<float>> protos;
  for (std::size_t id : ids) {
    bool accepted = false;
    for (int attempt = 0; attempt < kPrototypeAttempts && !accepted;
         ++attempt) {
      std::vector<float> candidate = unit_gaussian(rng, d);
      accepted = true;
      for (const auto& [other_id, other] : protos) {
        if (cosine(candidate, other) > 0.5) {
          accepted = false;
          break;
        }
      }
      if (accepted) protos.emplace(id, std::move(candidate));
    }
    if (!accepted) {
      throw ValueError("generate_scene: no prototype for id " +
                       std::to_string(id) + " with pairwise cosine <= 0.5 in " +
                       std::to_string(kPrototypeAttempts) +
                       " attempts; d=" + std::to_string(d) +
                       " is too small for " + std::to_string(ids.size()) +
                       " prototypes");
    }
  }
  return protos;
}

}  // namespace

void SceneSpec::validate() const {
  if (grid_h == 0 || grid_w == 0) {
    throw ValueError("SceneSpec: grid must be at least 1x1");
  }
  if (d < 2) {
    throw ValueError("SceneSpec: feature dimension must be >= 2, got " +
                     std::to_string(d));
  }
  if (!(noise_sigma >= 0.0f)) {
    throw ValueError("SceneSpec: noise_sigma must be >= 0");
  }
  for (const ObjectRect& r : objects) {
    if (r.id == 0) {
      throw ValueError("SceneSpec: object id 0 is reserved for background");
    }
    if (r.height == 0 || r.width == 0 || r.row + r.height > grid_h ||
        r.col + r.width > grid_w) {
      throw ValueError("SceneSpec: rectangle for id " + std::to_string(r.id) +
                       " does not fit the " + std::to_string(grid_h) + "x" +
                       std::to_string(grid_w) + " grid");
    }
  }
}

std::vector<std::size_t> scene_labels(const SceneSpec& spec) {
  spec.validate();
  std::vector<std::size_t> labels(spec.grid_h * spec.grid_w, 0);
  for (const ObjectRect& r : spec.objects) {
    for (std::size_t i = r.row; i < r.row + r.height; ++i) {
      for (std::size_t j = r.col; j < r.col + r.width; ++j) {
        labels[i * spec.grid_w + j] = r.id;
      }
    }
  }
  return labels;
}

LabeledPatches generate_scene(const SceneSpec& spec) {
  std::vector<std::size_t> labels = scene_labels(spec);
  for (const ObjectRect& r : spec.objects) {
    if (std::find(labels.begin(), labels.end(), r.id) == labels.end()) {
      throw ValueError("generate_scene: object id " + std::to_string(r.id) +
                       " is fully occluded by later rectangles");
    }
  }

  std::set<std::size_t> ids{0};
  for (const ObjectRect& r : spec.objects) ids.insert(r.id);
  const auto protos = draw_prototypes(ids, spec.d, spec.prototype_seed);

  SeededRng noise_rng(spec.noise_seed);
  Matrix2D features(labels.size(), spec.d);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::vector<float>& proto = protos.at(labels[i]);
    float* row = features.row(i);
    double norm_sq = 0.0;
    for (std::size_t c = 0; c < spec.d; ++c) {
      row[c] = proto[c] + spec.noise_sigma * noise_rng.gaussian();
      norm_sq += static_cast<double>(row[c]) * row[c];
    }
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
      throw ValueError("generate_scene: patch " + std::to_string(i) +
                       " degenerated to zero norm");
    }
    for (std::size_t c = 0; c < spec.d; ++c) {
      row[c] = static_cast<float>(row[c] / norm);
    }
  }
  return LabeledPatches{
      PatchEmbeddings{spec.grid_h, spec.grid_w, std::move(features), 0},
      std::move(labels)};
}

double affinity_contrast(const AffinityMap& a,
                         const std::vector<std::size_t>& labels) {
  if (labels.size() != a.n) {
    throw DimensionError("affinity_contrast: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(a.n) + " patches");
  }
  double same_sum = 0.0, cross_sum = 0.0;
  std::size_t same_count = 0, cross_count = 0;
  for (std::size_t i = 0; i < a.n; ++i) {
    for (std::size_t j = i + 1; j < a.n; ++j) {
      if (labels[i] == labels[j]) {
        same_sum += a.values(i, j);
        ++same_count;
      } else {
        cross_sum += a.values(i, j);
        ++cross_count;
      }
    }
  }
  if (same_count == 0) {
    throw ValueError("affinity_contrast: no same-label pair exists");
  }
  if (cross_count == 0) {
    throw ValueError("affinity_contrast: no cross-label pair exists");
  }
  return same_sum / static_cast<double>(same_count) -
         cross_sum / static_cast<double>(cross_count);
}

std::pair<double, double> sharpening_trial(const SceneSpec& spec,
                                           MixCoefficient lam, ClipMode clip) {
  LabeledPatches scene = generate_scene(spec);
  const AffinityMap before_map = compute_affinity(scene.patches);
  const double before = affinity_contrast(before_map, scene.labels);

  Matrix2D mixed =
      apply_ivra_to_tokens(scene.patches.features, before_map, lam, clip);
  const PatchEmbeddings mixed_patches{scene.patches.grid_h,
                                      scene.patches.grid_w, std::move(mixed),
                                      scene.patches.source_layer_offset};
  const double after =
      affinity_contrast(compute_affinity(mixed_patches), scene.labels);
  return {before, after};
}

SceneSpec random_scene_spec(std::size_t grid_h, std::size_t grid_w,
                            std::size_t num_objects, std::size_t d,
                            float noise_sigma, std::uint64_t seed) {
  if (grid_h == 0 || grid_w == 0 || num_objects == 0) {
    throw ValueError("random_scene_spec: grid and object count must be >= 1");
  }
  SeededRng rng(seed ^ kLayoutSalt);
  SceneSpec spec;
  spec.grid_h = grid_h;
  spec.grid_w = grid_w;
  spec.d = d;
  spec.noise_sigma = noise_sigma;
  spec.prototype_seed = seed;
  spec.noise_seed = seed ^ kNoiseSalt;

  const auto draw_extent = [&rng](std::size_t grid) {
    const std::size_t lo = std::max<std::size_t>(1, grid / 8);
    return lo + rng.below(grid - lo + 1);
  };
  for (int attempt = 0; attempt < kLayoutAttempts; ++attempt) {
    spec.objects.clear();
    for (std::size_t k = 0; k < num_objects; ++k) {
      ObjectRect r;
      r.id = k + 1;
      r.height = draw_extent(grid_h);
      r.width = draw_extent(grid_w);
      r.row = rng.below(grid_h - r.height + 1);
      r.col = rng.below(grid_w - r.width + 1);
      spec.objects.push_back(r);
    }
    const std::vector<std::size_t> labels = scene_labels(spec);
    bool all_visible = true;
    for (const ObjectRect& r : spec.objects) {
      if (std::find(labels.begin(), labels.end(), r.id) == labels.end()) {
        all_visible = false;
        break;
      }
    }
    if (all_visible) return spec;
  }
  throw ValueError("random_scene_spec: no layout with all " +
                   std::to_string(num_objects) + " objects visible after " +
                   std::to_string(kLayoutAttempts) + " attempts");
}

Matrix2D render_scene_image(const SceneSpec& spec, std::size_t patch_size) {
  if (patch_size == 0) {
    throw ValueError("render_scene_image: patch_size must be >= 1");
  }
  const std::vector<std::size_t> labels = scene_labels(spec);
  SeededRng pixel_rng(spec.noise_seed ^ kPixelSalt);
  Matrix2D img(spec.grid_h * patch_size, spec.grid_w * patch_size);
  for (std::size_t y = 0; y < img.rows(); ++y) {
    float* row = img.row(y);
    for (std::size_t x = 0; x < img.cols(); ++x) {
      const std::size_t cell =
          (y / patch_size) * spec.grid_w + (x / patch_size);
      // Golden-ratio spacing gives every id a distinct base intensity.
      const double phase = 0.6180339887498949 * static_cast<double>(labels[cell]);
      const float base =
          0.15f + 0.75f * static_cast<float>(phase - std::floor(phase));
      row[x] = base + 0.05f * pixel_rng.uniform(-1.0f, 1.0f);
    }
  }
  return img;
}

}  // namespace ivra
