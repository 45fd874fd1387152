#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "ivra/ablation.hpp"

using namespace ivra;

namespace {

AblationAxes small_axes() {
  AblationAxes axes;
  axes.lambdas = {0.0, 0.3};
  axes.layer_sets = {{5}, {4, 5}};
  axes.positions = {HookPosition::P0, HookPosition::P3};
  axes.clips = {ClipMode::relu};
  axes.seeds = {0, 1, 2};
  return axes;
}

AblationSceneParams small_scene() {
  AblationSceneParams scene;
  scene.grid_h = 8;
  scene.grid_w = 8;
  scene.num_objects = 2;
  scene.d = 16;
  scene.noise_sigma = 0.2f;
  return scene;
}

}  // namespace

TEST_CASE("format_layer_set joins with plus signs") {
  CHECK(format_layer_set({5}) == "5");
  CHECK(format_layer_set({4, 5}) == "4+5");
  CHECK(format_layer_set({1, 2, 3}) == "1+2+3");
}

TEST_CASE("run_ablation: one row per cell and seed, in sweep order") {
  const std::vector<AblationRow> rows = run_ablation(small_axes(), small_scene());
  REQUIRE(rows.size() == 2 * 2 * 2 * 1 * 3);

  // fastest axis is the seed, then clip, position, layers, lambda
  CHECK(rows[0].lambda == 0.0);
  CHECK(rows[0].layers == "5");
  CHECK(rows[0].position == "P0");
  CHECK(rows[0].seed == 0);
  CHECK(rows[1].seed == 1);
  CHECK(rows[3].position == "P3");
  CHECK(rows[6].layers == "4+5");
  CHECK(rows[12].lambda == 0.3);
  for (const AblationRow& row : rows) {
    CHECK(row.metric == "contrast_delta");
    CHECK(row.clip == "relu");
  }
}

TEST_CASE("run_ablation: lambda 0 rows carry exactly zero delta") {
  for (const AblationRow& row : run_ablation(small_axes(), small_scene())) {
    if (row.lambda == 0.0) CHECK(row.value == 0.0);
  }
}

TEST_CASE("run_ablation is deterministic across calls") {
  const auto a = run_ablation(small_axes(), small_scene());
  const auto b = run_ablation(small_axes(), small_scene());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].seed == b[i].seed);
  }
}

TEST_CASE("run_ablation rejects empty axes and bad lambdas") {
  AblationAxes axes = small_axes();
  axes.positions.clear();
  CHECK_THROWS_AS(run_ablation(axes, small_scene()), ValueError);
  axes = small_axes();
  axes.lambdas = {1.5};
  CHECK_THROWS_AS(run_ablation(axes, small_scene()), ValueError);
}
