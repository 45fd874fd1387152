// ivra: command-line front end for scene generation, affinity maps, pipeline
// runs, heatmaps, benchmarking, and the ablation sweep.
//
// Exit codes: 0 success, 2 usage/validation error, 3 data-format error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ivra/ablation.hpp"
#include "ivra/affinity.hpp"
#include "ivra/bench.hpp"
#include "ivra/io.hpp"
#include "ivra/matrix.hpp"
#include "ivra/pipeline.hpp"
#include "ivra/scenes.hpp"

namespace fs = std::filesystem;

namespace {

struct GridShape {
  std::size_t h = 0;
  std::size_t w = 0;
};

std::size_t parse_size(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw ivra::ValueError(what + ": '" + s + "' is not a positive integer");
  }
  if (pos != s.size() || v == 0) {
    throw ivra::ValueError(what + ": '" + s + "' is not a positive integer");
  }
  return static_cast<std::size_t>(v);
}

GridShape parse_grid(const std::string& s) {
  const std::size_t sep = s.find_first_of("xX");
  if (sep == std::string::npos || sep == 0 || sep + 1 >= s.size()) {
    throw ivra::ValueError("--grid expects HxW (e.g. 16x16), got '" + s + "'");
  }
  GridShape g;
  g.h = parse_size(s.substr(0, sep), "--grid height");
  g.w = parse_size(s.substr(sep + 1), "--grid width");
  return g;
}

// Square grid from a patch count, for files that carry no grid metadata.
GridShape infer_square_grid(std::size_t n, const std::string& what) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(
      static_cast<double>(n))));
  if (side == 0 || side * side != n) {
    throw ivra::ValueError(what + ": cannot infer a square grid for " +
                           std::to_string(n) + " patches; pass --grid HxW");
  }
  return {side, side};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.size() == 1 && parts[0].empty()) parts.clear();
  return parts;
}

double parse_real(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ivra::ValueError(what + ": '" + s + "' is not a number");
  }
  if (pos != s.size()) {
    throw ivra::ValueError(what + ": '" + s + "' is not a number");
  }
  return v;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) {
    throw ivra::ValueError("cannot write '" + path.string() + "'");
  }
}

void note_written(const fs::path& path) {
  std::cout << "wrote " << path.string() << "\n";
}

const CLI::Validator kPositiveInt(
    [](std::string& s) -> std::string {
      try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos == s.size() && v >= 1) return {};
      } catch (const std::exception&) {
      }
      return "must be a positive integer";
    },
    "POSITIVE_INT");

const CLI::Validator kNonNegativeReal(
    [](std::string& s) -> std::string {
      try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size() && v >= 0.0) return {};
      } catch (const std::exception&) {
      }
      return "must be a non-negative number";
    },
    "NONNEG_REAL");

// ---------------------------------------------------------------------------
// Run configuration (JSON file + flag overrides)

// Everything a `run` or `bench` needs to build the stacks and the injection.
// Defaults reproduce the chosen setting: lambda 0.3, position P0, clip relu,
// encoder_layer_offset 2, and a single injected layer at relative depth
// 20/32 of the decoder (layer 5 of 8).
struct ToolConfig {
  double lambda = 0.3;
  std::vector<std::size_t> inject_layers;  // empty => auto single layer
  bool inject_layers_given = false;
  std::string position = "P0";
  std::string clip = "relu";
  std::size_t encoder_layer_offset = 2;
  std::uint64_t seed = 0;

  std::size_t dec_num_layers = 8;
  std::size_t d_model = 256;
  std::size_t num_heads = 4;

  std::size_t enc_num_layers = 4;
  std::size_t enc_d = 64;
  std::size_t patch_size = 4;
};

std::size_t default_inject_layer(std::size_t num_layers) {
  std::size_t layer = (num_layers * 20) / 32;
  if (layer >= num_layers) layer = num_layers - 1;
  return layer;
}

void reject_unknown_config_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ivra::ValueError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

std::uint64_t config_uint(const nlohmann::json& v, const std::string& what) {
  if (!v.is_number_unsigned()) {
    throw ivra::ValueError(what + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

// Config validation failures (including malformed JSON) are usage errors:
// the config file is operator input, not a data artifact.
ToolConfig load_tool_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ivra::ValueError("cannot open config '" + path + "'");
  }
  const std::string where = "config '" + path + "'";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ivra::ValueError(where + ": " + e.what());
  }
  if (!j.is_object()) {
    throw ivra::ValueError(where + ": top level must be a JSON object");
  }
  reject_unknown_config_keys(j,
                             {"lambda", "inject_layers", "position", "clip",
                              "encoder_layer_offset", "seed", "decoder",
                              "encoder"},
                             where);

  ToolConfig cfg;
  if (j.contains("lambda")) {
    if (!j["lambda"].is_number()) {
      throw ivra::ValueError(where + ": lambda must be a number");
    }
    cfg.lambda = j["lambda"].get<double>();
  }
  if (j.contains("inject_layers")) {
    if (!j["inject_layers"].is_array()) {
      throw ivra::ValueError(where + ": inject_layers must be an array");
    }
    cfg.inject_layers_given = true;
    for (const auto& v : j["inject_layers"]) {
      cfg.inject_layers.push_back(static_cast<std::size_t>(
          config_uint(v, where + ": inject_layers entries")));
    }
  }
  if (j.contains("position")) {
    if (!j["position"].is_string()) {
      throw ivra::ValueError(where + ": position must be a string");
    }
    cfg.position = j["position"].get<std::string>();
  }
  if (j.contains("clip")) {
    if (!j["clip"].is_string()) {
      throw ivra::ValueError(where + ": clip must be a string");
    }
    cfg.clip = j["clip"].get<std::string>();
  }
  if (j.contains("encoder_layer_offset")) {
    cfg.encoder_layer_offset = static_cast<std::size_t>(
        config_uint(j["encoder_layer_offset"], where + ": encoder_layer_offset"));
  }
  if (j.contains("seed")) {
    cfg.seed = config_uint(j["seed"], where + ": seed");
  }
  if (j.contains("decoder")) {
    const nlohmann::json& d = j["decoder"];
    if (!d.is_object()) {
      throw ivra::ValueError(where + ": decoder must be an object");
    }
    reject_unknown_config_keys(d, {"num_layers", "d_model", "num_heads"},
                               where + ": decoder");
    if (d.contains("num_layers")) {
      cfg.dec_num_layers = static_cast<std::size_t>(
          config_uint(d["num_layers"], where + ": decoder.num_layers"));
    }
    if (d.contains("d_model")) {
      cfg.d_model = static_cast<std::size_t>(
          config_uint(d["d_model"], where + ": decoder.d_model"));
    }
    if (d.contains("num_heads")) {
      cfg.num_heads = static_cast<std::size_t>(
          config_uint(d["num_heads"], where + ": decoder.num_heads"));
    }
  }
  if (j.contains("encoder")) {
    const nlohmann::json& e = j["encoder"];
    if (!e.is_object()) {
      throw ivra::ValueError(where + ": encoder must be an object");
    }
    reject_unknown_config_keys(e, {"num_layers", "d", "patch_size"},
                               where + ": encoder");
    if (e.contains("num_layers")) {
      cfg.enc_num_layers = static_cast<std::size_t>(
          config_uint(e["num_layers"], where + ": encoder.num_layers"));
    }
    if (e.contains("d")) {
      cfg.enc_d = static_cast<std::size_t>(
          config_uint(e["d"], where + ": encoder.d"));
    }
    if (e.contains("patch_size")) {
      cfg.patch_size = static_cast<std::size_t>(
          config_uint(e["patch_size"], where + ": encoder.patch_size"));
    }
  }
  return cfg;
}

ivra::InjectConfig make_inject_config(const ToolConfig& cfg) {
  ivra::InjectConfig inject;
  inject.lambda = ivra::MixCoefficient(static_cast<float>(cfg.lambda));
  inject.inject_layers = cfg.inject_layers_given
                             ? cfg.inject_layers
                             : std::vector<std::size_t>{default_inject_layer(
                                   cfg.dec_num_layers)};
  inject.position = ivra::hook_position_from_string(cfg.position);
  inject.clip = ivra::clip_mode_from_string(cfg.clip);
  inject.encoder_layer_offset = cfg.encoder_layer_offset;
  return inject;
}

// ---------------------------------------------------------------------------
// Subcommand options

struct GenSceneOpts {
  std::uint64_t seed = 0;
  std::string grid = "16x16";
  std::size_t objects = 3;
  double sigma = 0.3;
  std::size_t dim = 32;
  std::string out_dir;
};

struct AffinityOpts {
  std::string embeddings;
  std::string out;
  std::string grid;
};

struct HeatmapOpts {
  std::string affinity;
  std::size_t ref = 0;
  std::string out;
  std::string grid;
};

struct RunOpts {
  std::string config;
  std::string scene;
  std::string out_dir;
  bool baseline = false;
  std::size_t prefix = 4;
  std::size_t suffix = 4;
  // flag overrides; count()-guarded in cmd_run
  double lambda = 0.3;
  std::string layers;
  std::string position = "P0";
  std::string clip = "relu";
  std::size_t offset = 2;
  std::uint64_t seed = 0;
};

struct AblateOpts {
  std::string lambdas = "0,0.3,0.7,1";
  std::string layers = "5";
  std::string positions = "P0,P1,P2,P3,P4";
  std::string clips = "relu";
  std::string seeds = "0,1,2,3,4";
  std::string out_csv;
  std::string grid = "16x16";
  std::size_t objects = 3;
  double sigma = 0.3;
  std::size_t dim = 32;
};

struct BenchOpts {
  std::size_t n = 256;
  std::size_t d = 512;
  std::size_t layers = 8;
  std::size_t reps = 9;
  std::size_t warmups = 1;
  std::size_t threads = 1;
  double lambda = 0.3;
  std::string position = "P0";
  std::string clip = "relu";
  std::string inject_layers = "auto";
  std::string out;
};

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_scene(const GenSceneOpts& o) {
  const GridShape grid = parse_grid(o.grid);
  const ivra::SceneSpec spec =
      ivra::random_scene_spec(grid.h, grid.w, o.objects, o.dim,
                              static_cast<float>(o.sigma), o.seed);
  const ivra::LabeledPatches scene = ivra::generate_scene(spec);

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  const fs::path patches = dir / "patches.ivrt";
  const fs::path labels = dir / "labels.txt";
  const fs::path spec_json = dir / "scene.json";
  ivra::write_tensor(patches.string(), scene.patches.features);
  ivra::write_labels(labels.string(), scene.labels);
  ivra::write_scene_spec(spec_json.string(), spec);
  note_written(patches);
  note_written(labels);
  note_written(spec_json);
  return 0;
}

int cmd_affinity(const AffinityOpts& o) {
  ivra::PatchEmbeddings patches;
  patches.features = ivra::read_tensor(o.embeddings);
  const GridShape grid =
      o.grid.empty() ? infer_square_grid(patches.features.rows(), "affinity")
                     : parse_grid(o.grid);
  patches.grid_h = grid.h;
  patches.grid_w = grid.w;
  patches.validate();

  const ivra::AffinityMap a = ivra::compute_affinity(patches);
  ivra::write_tensor(o.out, a.values);
  note_written(o.out);

  nlohmann::json sidecar;
  sidecar["grid"] = {a.grid_h, a.grid_w};
  const std::string sidecar_path = o.out + ".json";
  write_text_file(sidecar_path, sidecar.dump(2) + "\n");
  note_written(sidecar_path);
  return 0;
}

// Grid for a bare affinity tensor: --grid flag beats the sidecar written by
// `affinity`, which beats square inference.
GridShape heatmap_grid(const HeatmapOpts& o, std::size_t n) {
  if (!o.grid.empty()) return parse_grid(o.grid);
  const std::string sidecar_path = o.affinity + ".json";
  std::ifstream sidecar(sidecar_path, std::ios::binary);
  if (sidecar) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(sidecar);
    } catch (const nlohmann::json::parse_error& e) {
      throw ivra::FormatError("sidecar '" + sidecar_path + "': " + e.what());
    }
    if (!j.is_object() || !j.contains("grid") || !j["grid"].is_array() ||
        j["grid"].size() != 2 || !j["grid"][0].is_number_unsigned() ||
        !j["grid"][1].is_number_unsigned()) {
      throw ivra::FormatError("sidecar '" + sidecar_path +
                              "': expected {\"grid\": [h, w]}");
    }
    return {j["grid"][0].get<std::size_t>(), j["grid"][1].get<std::size_t>()};
  }
  return infer_square_grid(n, "heatmap");
}

int cmd_heatmap(const HeatmapOpts& o) {
  ivra::AffinityMap a;
  a.values = ivra::read_tensor(o.affinity);
  if (a.values.rows() != a.values.cols()) {
    throw ivra::ValueError("heatmap: affinity tensor must be square, got " +
                           std::to_string(a.values.rows()) + "x" +
                           std::to_string(a.values.cols()));
  }
  a.n = a.values.rows();
  const GridShape grid = heatmap_grid(o, a.n);
  a.grid_h = grid.h;
  a.grid_w = grid.w;

  ivra::write_heatmap(o.out, a, o.ref);
  note_written(o.out);

  nlohmann::json sidecar;
  sidecar["ref_index"] = o.ref;
  sidecar["grid"] = {a.grid_h, a.grid_w};
  const std::string sidecar_path = o.out + ".json";
  write_text_file(sidecar_path, sidecar.dump(2) + "\n");
  note_written(sidecar_path);
  return 0;
}

std::vector<std::size_t> parse_layer_list(const std::string& s) {
  std::vector<std::size_t> layers;
  for (const std::string& part : split(s, ',')) {
    layers.push_back(parse_size(part, "layer index"));
  }
  return layers;
}

int cmd_run(const RunOpts& o, const CLI::App& cli) {
  ToolConfig cfg = o.config.empty() ? ToolConfig{} : load_tool_config(o.config);
  if (cli.count("--lambda") > 0) cfg.lambda = o.lambda;
  if (cli.count("--layers") > 0) {
    cfg.inject_layers = parse_layer_list(o.layers);
    cfg.inject_layers_given = true;
  }
  if (cli.count("--position") > 0) cfg.position = o.position;
  if (cli.count("--clip") > 0) cfg.clip = o.clip;
  if (cli.count("--offset") > 0) cfg.encoder_layer_offset = o.offset;
  if (cli.count("--seed") > 0) cfg.seed = o.seed;

  const ivra::InjectConfig inject = make_inject_config(cfg);
  const ivra::SceneSpec scene = ivra::read_scene_spec(o.scene);

  const ivra::ToyEncoder enc(cfg.enc_num_layers, cfg.enc_d, cfg.patch_size,
                             cfg.seed);
  const ivra::ToyDecoderStack dec(cfg.dec_num_layers, cfg.d_model,
                                  cfg.num_heads, cfg.seed + 1);
  const ivra::Matrix2D img = ivra::render_scene_image(scene, enc.patch_size());
  const ivra::PromptSpec prompt{o.prefix, o.suffix, cfg.seed};

  ivra::RunOptions options;
  options.capture_hook_states = true;
  const ivra::RunResult run =
      ivra::run_pipeline(img, prompt, enc, dec, inject, options);

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  const fs::path final_path = dir / "final.ivrt";
  ivra::write_tensor(final_path.string(), run.sequence.tokens);
  note_written(final_path);

  nlohmann::json manifest;
  manifest["lambda"] = cfg.lambda;
  manifest["inject_layers"] = inject.inject_layers;
  manifest["position"] = ivra::to_string(inject.position);
  manifest["clip"] = ivra::to_string(inject.clip);
  manifest["encoder_layer_offset"] = inject.encoder_layer_offset;
  manifest["seed"] = cfg.seed;
  manifest["decoder"] = {{"num_layers", cfg.dec_num_layers},
                         {"d_model", cfg.d_model},
                         {"num_heads", cfg.num_heads}};
  manifest["encoder"] = {{"num_layers", cfg.enc_num_layers},
                         {"d", cfg.enc_d},
                         {"patch_size", cfg.patch_size}};
  manifest["prompt"] = {{"prefix", o.prefix}, {"suffix", o.suffix}};
  manifest["grid"] = {run.sequence.grid_h, run.sequence.grid_w};
  manifest["visual_start"] = run.sequence.visual_start;
  manifest["visual_count"] = run.sequence.visual_count;
  manifest["affinity_computations"] = run.affinity_computations;

  nlohmann::json files;
  files["final"] = "final.ivrt";

  // Pre/post-hook visual-token blocks, one pair per injected layer.
  for (const ivra::HookCapture& cap : run.captures) {
    const std::string stem = "layer" + std::to_string(cap.layer);
    const ivra::Matrix2D pre =
        ivra::slice_rows(cap.pre, run.sequence.visual_start,
                         run.sequence.visual_end());
    const ivra::Matrix2D post =
        ivra::slice_rows(cap.post, run.sequence.visual_start,
                         run.sequence.visual_end());
    const fs::path pre_path = dir / (stem + "_pre.ivrt");
    const fs::path post_path = dir / (stem + "_post.ivrt");
    ivra::write_tensor(pre_path.string(), pre);
    ivra::write_tensor(post_path.string(), post);
    note_written(pre_path);
    note_written(post_path);
    files["layers"][std::to_string(cap.layer)] = {
        {"pre", stem + "_pre.ivrt"}, {"post", stem + "_post.ivrt"}};
  }

  if (o.baseline) {
    const ivra::RunResult base =
        ivra::run_pipeline(img, prompt, enc, dec, std::nullopt);
    const fs::path base_path = dir / "baseline_final.ivrt";
    ivra::write_tensor(base_path.string(), base.sequence.tokens);
    note_written(base_path);
    files["baseline"] = "baseline_final.ivrt";
  }

  manifest["files"] = files;
  const fs::path manifest_path = dir / "manifest.json";
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  note_written(manifest_path);
  return 0;
}

int cmd_ablate(const AblateOpts& o) {
  ivra::AblationAxes axes;
  for (const std::string& part : split(o.lambdas, ',')) {
    axes.lambdas.push_back(parse_real(part, "--lambdas"));
  }
  for (const std::string& set : split(o.layers, ';')) {
    axes.layer_sets.push_back(parse_layer_list(set));
  }
  for (const std::string& part : split(o.positions, ',')) {
    axes.positions.push_back(ivra::hook_position_from_string(part));
  }
  for (const std::string& part : split(o.clips, ',')) {
    axes.clips.push_back(ivra::clip_mode_from_string(part));
  }
  for (const std::string& part : split(o.seeds, ',')) {
    std::size_t pos = 0;
    axes.seeds.push_back(std::stoull(part, &pos));
    if (pos != part.size()) {
      throw ivra::ValueError("--seeds: '" + part + "' is not an integer");
    }
  }

  const GridShape grid = parse_grid(o.grid);
  ivra::AblationSceneParams scene;
  scene.grid_h = grid.h;
  scene.grid_w = grid.w;
  scene.num_objects = o.objects;
  scene.d = o.dim;
  scene.noise_sigma = static_cast<float>(o.sigma);

  const std::vector<ivra::AblationRow> rows = ivra::run_ablation(axes, scene);
  ivra::write_ablation_csv(o.out_csv, rows);
  note_written(o.out_csv);
  std::cout << rows.size() << " data rows\n";
  return 0;
}

int cmd_bench(const BenchOpts& o) {
  ToolConfig cfg;
  cfg.lambda = o.lambda;
  cfg.position = o.position;
  cfg.clip = o.clip;
  cfg.dec_num_layers = o.layers;
  if (o.inject_layers == "auto") {
    // default single layer, resolved against the bench stack depth
  } else if (o.inject_layers == "none") {
    cfg.inject_layers_given = true;  // empty set: measure the no-op overhead
  } else {
    cfg.inject_layers = parse_layer_list(o.inject_layers);
    cfg.inject_layers_given = true;
  }
  const ivra::InjectConfig inject = make_inject_config(cfg);

  const ivra::BenchReport report =
      ivra::run_bench(o.n, o.d, o.layers, inject, o.reps, o.warmups, o.threads);
  const std::string json = ivra::bench_report_json(report);
  std::cout << json << "\n";
  if (!o.out.empty()) {
    write_text_file(o.out, json + "\n");
    note_written(o.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ivra: affinity-guided visual token intervention on a toy "
      "vision-language pipeline"};
  app.require_subcommand(1);

  GenSceneOpts gen;
  CLI::App* gen_cmd = app.add_subcommand(
      "gen-scene", "Generate a synthetic labeled scene (patches + labels)");
  gen_cmd->add_option("--seed", gen.seed, "Scene seed")->capture_default_str();
  gen_cmd->add_option("--grid", gen.grid, "Patch grid as HxW")
      ->capture_default_str();
  gen_cmd->add_option("--objects", gen.objects, "Number of objects (>= 1)")
      ->check(kPositiveInt)
      ->capture_default_str();
  gen_cmd->add_option("--sigma", gen.sigma, "Gaussian noise level (>= 0)")
      ->check(kNonNegativeReal)
      ->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Embedding dimension")
      ->check(kPositiveInt)
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();

  AffinityOpts aff;
  CLI::App* aff_cmd = app.add_subcommand(
      "affinity", "Compute the pairwise-cosine affinity map of an embedding "
                  "tensor");
  aff_cmd->add_option("--embeddings", aff.embeddings,
                      "Input patch embeddings (.ivrt)")
      ->required();
  aff_cmd->add_option("--out", aff.out, "Output affinity tensor (.ivrt)")
      ->required();
  aff_cmd->add_option("--grid", aff.grid,
                      "Patch grid as HxW (default: infer a square grid)");

  HeatmapOpts heat;
  CLI::App* heat_cmd = app.add_subcommand(
      "heatmap", "Render one affinity row as a grayscale P5 image");
  heat_cmd->add_option("--affinity", heat.affinity,
                       "Input affinity tensor (.ivrt)")
      ->required();
  heat_cmd->add_option("--ref", heat.ref, "Reference patch index")
      ->capture_default_str();
  heat_cmd->add_option("--out", heat.out, "Output PGM path")->required();
  heat_cmd->add_option("--grid", heat.grid,
                       "Patch grid as HxW (default: sidecar JSON, then "
                       "square inference)");

  RunOpts run;
  CLI::App* run_cmd = app.add_subcommand(
      "run", "Run the toy pipeline on a scene with token injection");
  run_cmd->add_option("--config", run.config, "JSON config file (optional)");
  run_cmd->add_option("--scene", run.scene, "Scene spec JSON")->required();
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory")
      ->required();
  run_cmd->add_flag("--baseline", run.baseline,
                    "Also write the uninjected run for diffing");
  run_cmd->add_option("--prefix", run.prefix, "Text prefix length")
      ->capture_default_str();
  run_cmd->add_option("--suffix", run.suffix, "Text suffix length")
      ->capture_default_str();
  run_cmd->add_option("--lambda", run.lambda, "Mixing coefficient in [0, 1]")
      ->capture_default_str();
  run_cmd->add_option("--layers", run.layers,
                      "Injected decoder layers, comma-separated (default: "
                      "single layer at 20/32 relative depth)");
  run_cmd->add_option("--position", run.position,
                      "Hook position P0..P4 (P0 = block input)")
      ->capture_default_str();
  run_cmd->add_option("--clip", run.clip, "Affinity clip mode: relu or none")
      ->capture_default_str();
  run_cmd->add_option("--offset", run.offset,
                      "Encoder layer offset for the affinity tap")
      ->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Model/prompt seed")
      ->capture_default_str();

  AblateOpts abl;
  CLI::App* abl_cmd = app.add_subcommand(
      "ablate", "Sweep lambda/layers/position/clip over seeded scenes");
  abl_cmd->add_option("--lambdas", abl.lambdas, "Comma-separated lambda axis")
      ->capture_default_str();
  abl_cmd->add_option("--layers", abl.layers,
                      "Layer-set axis: sets split by ';', layers by ','")
      ->capture_default_str();
  abl_cmd->add_option("--positions", abl.positions,
                      "Comma-separated position axis (P0..P4)")
      ->capture_default_str();
  abl_cmd->add_option("--clips", abl.clips,
                      "Comma-separated clip axis (relu, none)")
      ->capture_default_str();
  abl_cmd->add_option("--seeds", abl.seeds, "Comma-separated seed axis")
      ->capture_default_str();
  abl_cmd->add_option("--out", abl.out_csv, "Output CSV path")->required();
  abl_cmd->add_option("--grid", abl.grid, "Scene grid as HxW")
      ->capture_default_str();
  abl_cmd->add_option("--objects", abl.objects, "Objects per scene")
      ->check(kPositiveInt)
      ->capture_default_str();
  abl_cmd->add_option("--sigma", abl.sigma, "Scene noise level")
      ->check(kNonNegativeReal)
      ->capture_default_str();
  abl_cmd->add_option("--dim", abl.dim, "Scene embedding dimension")
      ->check(kPositiveInt)
      ->capture_default_str();

  BenchOpts bench;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Measure injection overhead against the uninjected baseline");
  bench_cmd->add_option("--n", bench.n, "Visual token count")
      ->check(kPositiveInt)
      ->capture_default_str();
  bench_cmd->add_option("--d", bench.d, "Decoder width d_model")
      ->check(kPositiveInt)
      ->capture_default_str();
  bench_cmd->add_option("--layers", bench.layers, "Decoder depth")
      ->check(kPositiveInt)
      ->capture_default_str();
  bench_cmd->add_option("--reps", bench.reps, "Timed repetitions (>= 5)")
      ->capture_default_str();
  bench_cmd->add_option("--warmups", bench.warmups, "Untimed warmup pairs")
      ->capture_default_str();
  bench_cmd->add_option("--threads", bench.threads,
                        "Kernel threads (> 1 selects the parallel variant, "
                        "reported separately)")
      ->check(kPositiveInt)
      ->capture_default_str();
  bench_cmd->add_option("--lambda", bench.lambda, "Mixing coefficient")
      ->capture_default_str();
  bench_cmd->add_option("--position", bench.position, "Hook position P0..P4")
      ->capture_default_str();
  bench_cmd->add_option("--clip", bench.clip, "Affinity clip mode")
      ->capture_default_str();
  bench_cmd->add_option("--inject-layers", bench.inject_layers,
                        "Injected layers: 'auto' (single layer at 20/32 "
                        "depth), 'none', or a comma-separated list")
      ->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_scene(gen);
    if (aff_cmd->parsed()) return cmd_affinity(aff);
    if (heat_cmd->parsed()) return cmd_heatmap(heat);
    if (run_cmd->parsed()) return cmd_run(run, *run_cmd);
    if (abl_cmd->parsed()) return cmd_ablate(abl);
    if (bench_cmd->parsed()) return cmd_bench(bench);
  } catch (const ivra::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
