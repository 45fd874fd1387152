// End-to-end tests for the `ivra` command-line tool. The binary path arrives
// as argv[1] (wired up by CTest); every case shells out to it and checks exit
// codes, stdout, and the bytes of the files it writes.
#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ivra/io.hpp"
#include "ivra/matrix.hpp"
#include "ivra/scenes.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;      // path to the ivra binary under test
fs::path g_scratch;     // per-process scratch directory

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Runs `ivra <args>`, capturing exit code and both streams.
CmdResult run_cli(const std::string& args) {
  const fs::path out_path = g_scratch / "cmd_stdout.txt";
  const fs::path err_path = g_scratch / "cmd_stderr.txt";
  const std::string cmd = g_cli + " " + args + " > " + out_path.string() +
                          " 2> " + err_path.string();
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  if (raw != -1 && WIFEXITED(raw)) r.code = WEXITSTATUS(raw);
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  const std::string ba = read_file(a);
  return !ba.empty() && ba == read_file(b);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = g_scratch / name;
  fs::create_directories(dir);
  return dir;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("help exits 0 and documents the default setting") {
  const CmdResult top = run_cli("--help");
  CHECK(top.code == 0);
  for (const char* sub :
       {"gen-scene", "affinity", "heatmap", "run", "ablate", "bench"}) {
    CHECK(top.out.find(sub) != std::string::npos);
  }

  const CmdResult run_help = run_cli("run --help");
  CHECK(run_help.code == 0);
  CHECK(run_help.out.find("[0.3]") != std::string::npos);
  CHECK(run_help.out.find("[P0]") != std::string::npos);
  CHECK(run_help.out.find("[relu]") != std::string::npos);
  CHECK(run_help.out.find("--offset UINT [2]") != std::string::npos);
  CHECK(run_help.out.find("single layer") != std::string::npos);
}

TEST_CASE("no subcommand or unknown flag is a usage error") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("gen-scene --bogus 1 --out x").code == 2);
}

TEST_CASE("gen-scene replays byte-identically and is self-consistent") {
  const fs::path a = scratch_dir("gen_a");
  const fs::path b = scratch_dir("gen_b");
  const std::string flags = "gen-scene --seed 7 --grid 6x6 --objects 2 "
                            "--sigma 0.2 --dim 16 --out ";
  const CmdResult ra = run_cli(flags + a.string());
  CHECK(ra.code == 0);
  CHECK(ra.out.find("wrote ") != std::string::npos);
  CHECK(run_cli(flags + b.string()).code == 0);

  for (const char* name : {"patches.ivrt", "labels.txt", "scene.json"}) {
    CAPTURE(name);
    CHECK(same_bytes(a / name, b / name));
  }

  // The three artifacts describe the same scene: labels.txt must equal the
  // labels implied by scene.json, and patches.ivrt must have one row per cell.
  const ivra::SceneSpec spec =
      ivra::read_scene_spec((a / "scene.json").string());
  const std::vector<std::size_t> labels =
      ivra::read_labels((a / "labels.txt").string());
  CHECK(labels == ivra::scene_labels(spec));
  const ivra::Matrix2D patches = ivra::read_tensor((a / "patches.ivrt").string());
  CHECK(patches.rows() == spec.grid_h * spec.grid_w);
  CHECK(patches.cols() == spec.d);
}

TEST_CASE("gen-scene rejects zero objects and bad grids") {
  const fs::path dir = scratch_dir("gen_bad");
  CHECK(run_cli("gen-scene --objects 0 --out " + dir.string()).code == 2);
  CHECK(run_cli("gen-scene --grid 16 --out " + dir.string()).code == 2);
}

TEST_CASE("affinity of identical patches is the all-ones map") {
  const fs::path dir = scratch_dir("aff_ones");
  const fs::path emb = dir / "emb.ivrt";
  ivra::Matrix2D m(4, 8);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      m(i, j) = 0.5f + static_cast<float>(j);
    }
  }
  ivra::write_tensor(emb.string(), m);

  const fs::path out = dir / "aff.ivrt";
  const CmdResult r = run_cli("affinity --embeddings " + emb.string() +
                              " --out " + out.string());
  CHECK(r.code == 0);
  const ivra::Matrix2D a = ivra::read_tensor(out.string());
  REQUIRE(a.rows() == 4);
  REQUIRE(a.cols() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.data()[i] == doctest::Approx(1.0).epsilon(1e-6));
  }
  // The sidecar records the inferred 2x2 grid.
  const std::string sidecar = read_file(out.string() + ".json");
  CHECK(sidecar.find("\"grid\"") != std::string::npos);
  CHECK(sidecar.find("2") != std::string::npos);
}

TEST_CASE("affinity refuses a non-square patch count without --grid") {
  const fs::path dir = scratch_dir("aff_grid");
  const fs::path emb = dir / "emb.ivrt";
  ivra::Matrix2D m(6, 8);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<float>(i + 1);
  }
  ivra::write_tensor(emb.string(), m);
  const fs::path out = dir / "aff.ivrt";
  CHECK(run_cli("affinity --embeddings " + emb.string() + " --out " +
                out.string())
            .code == 2);
  CHECK(run_cli("affinity --embeddings " + emb.string() + " --out " +
                out.string() + " --grid 2x3")
            .code == 0);
}

TEST_CASE("malformed tensor files exit 3") {
  const fs::path dir = scratch_dir("bad_magic");
  const fs::path bad = dir / "bad.ivrt";
  std::ofstream(bad, std::ios::binary) << "XXXXnot a tensor at all";
  CHECK(run_cli("affinity --embeddings " + bad.string() + " --out " +
                (dir / "a.ivrt").string())
            .code == 3);
  CHECK(run_cli("heatmap --affinity " + bad.string() + " --out " +
                (dir / "h.pgm").string())
            .code == 3);
}

TEST_CASE("heatmap rejects an out-of-range reference index") {
  const fs::path dir = scratch_dir("heat_oor");
  const fs::path emb = dir / "emb.ivrt";
  ivra::Matrix2D m(4, 8);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<float>(i % 7) - 3.0f;
  }
  ivra::write_tensor(emb.string(), m);
  const fs::path aff = dir / "aff.ivrt";
  REQUIRE(run_cli("affinity --embeddings " + emb.string() + " --out " +
                  aff.string())
              .code == 0);
  CHECK(run_cli("heatmap --affinity " + aff.string() + " --ref 99 --out " +
                (dir / "h.pgm").string())
            .code == 2);
}

TEST_CASE("gen-scene -> affinity -> heatmap replays byte-identically") {
  const fs::path a = scratch_dir("e2e_a");
  const fs::path b = scratch_dir("e2e_b");
  for (const fs::path& dir : {a, b}) {
    REQUIRE(run_cli("gen-scene --seed 11 --grid 4x4 --objects 2 --dim 16 "
                    "--out " +
                    dir.string())
                .code == 0);
    REQUIRE(run_cli("affinity --embeddings " +
                    (dir / "patches.ivrt").string() + " --out " +
                    (dir / "aff.ivrt").string())
                .code == 0);
    REQUIRE(run_cli("heatmap --affinity " + (dir / "aff.ivrt").string() +
                    " --ref 5 --out " + (dir / "heat.pgm").string())
                .code == 0);
  }
  CHECK(same_bytes(a / "aff.ivrt", b / "aff.ivrt"));
  CHECK(same_bytes(a / "heat.pgm", b / "heat.pgm"));
  CHECK(same_bytes(a / "heat.pgm.json", b / "heat.pgm.json"));

  // The PGM really is a P5 graymap over the 4x4 patch grid.
  const std::string pgm = read_file(a / "heat.pgm");
  CHECK(pgm.rfind("P5\n4 4\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n4 4\n255\n").size() + 16);
}

TEST_CASE("run at lambda 0 matches its own baseline bit for bit") {
  const fs::path dir = scratch_dir("run_l0");
  REQUIRE(run_cli("gen-scene --seed 3 --grid 4x4 --objects 2 --dim 16 --out " +
                  dir.string())
              .code == 0);
  const std::string scene = (dir / "scene.json").string();
  const fs::path out = dir / "out";
  const CmdResult r = run_cli("run --scene " + scene + " --out-dir " +
                              out.string() + " --lambda 0 --baseline");
  CHECK(r.code == 0);
  CHECK(same_bytes(out / "final.ivrt", out / "baseline_final.ivrt"));

  // The affinity map was still computed (once) even though the mix is a
  // no-op, and the default single injected layer is 5 of 8.
  const std::string manifest = read_file(out / "manifest.json");
  CHECK(manifest.find("\"affinity_computations\": 1") != std::string::npos);
  CHECK(manifest.find("\"inject_layers\": [\n    5\n  ]") !=
        std::string::npos);
  CHECK(fs::exists(out / "layer5_pre.ivrt"));
  CHECK(fs::exists(out / "layer5_post.ivrt"));
  // lambda 0: the hook rewrites nothing, so pre and post visual blocks match.
  CHECK(same_bytes(out / "layer5_pre.ivrt", out / "layer5_post.ivrt"));
}

TEST_CASE("run replays byte-identically across output directories") {
  const fs::path dir = scratch_dir("run_replay");
  REQUIRE(run_cli("gen-scene --seed 5 --grid 4x4 --objects 2 --dim 16 --out " +
                  dir.string())
              .code == 0);
  const std::string scene = (dir / "scene.json").string();
  const fs::path r1 = dir / "r1";
  const fs::path r2 = dir / "r2";
  const std::string flags = " --lambda 0.4 --layers 2,3 --position P2 "
                            "--seed 9";
  REQUIRE(run_cli("run --scene " + scene + " --out-dir " + r1.string() +
                  flags)
              .code == 0);
  REQUIRE(run_cli("run --scene " + scene + " --out-dir " + r2.string() +
                  flags)
              .code == 0);
  for (const char* name : {"final.ivrt", "layer2_pre.ivrt", "layer2_post.ivrt",
                           "layer3_pre.ivrt", "layer3_post.ivrt",
                           "manifest.json"}) {
    CAPTURE(name);
    CHECK(same_bytes(r1 / name, r2 / name));
  }
  const std::string manifest = read_file(r1 / "manifest.json");
  CHECK(manifest.find("\"lambda\": 0.4") != std::string::npos);
  CHECK(manifest.find("\"position\": \"P2\"") != std::string::npos);
}

TEST_CASE("run validation and data errors use distinct exit codes") {
  const fs::path dir = scratch_dir("run_err");
  REQUIRE(run_cli("gen-scene --seed 3 --grid 4x4 --objects 2 --dim 16 --out " +
                  dir.string())
              .code == 0);
  const std::string scene = (dir / "scene.json").string();
  const std::string out = (dir / "out").string();
  // lambda outside [0, 1] and an out-of-range layer are validation errors.
  CHECK(run_cli("run --scene " + scene + " --out-dir " + out +
                " --lambda 1.5")
            .code == 2);
  CHECK(run_cli("run --scene " + scene + " --out-dir " + out + " --layers 8")
            .code == 2);
  // A missing or corrupt scene file is a data error.
  CHECK(run_cli("run --scene " + (dir / "nope.json").string() +
                " --out-dir " + out)
            .code == 3);
  const fs::path corrupt = dir / "corrupt.json";
  std::ofstream(corrupt, std::ios::binary) << "{not json";
  CHECK(run_cli("run --scene " + corrupt.string() + " --out-dir " + out)
            .code == 3);
}

TEST_CASE("config file drives the run and flags override it") {
  const fs::path dir = scratch_dir("run_cfg");
  REQUIRE(run_cli("gen-scene --seed 3 --grid 4x4 --objects 2 --dim 16 --out " +
                  dir.string())
              .code == 0);
  const std::string scene = (dir / "scene.json").string();

  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg, std::ios::binary)
      << "{\"lambda\": 0.7, \"position\": \"P3\", "
         "\"decoder\": {\"num_layers\": 4}}";

  const fs::path o1 = dir / "o1";
  REQUIRE(run_cli("run --config " + cfg.string() + " --scene " + scene +
                  " --out-dir " + o1.string())
              .code == 0);
  const std::string m1 = read_file(o1 / "manifest.json");
  CHECK(m1.find("\"lambda\": 0.7") != std::string::npos);
  CHECK(m1.find("\"position\": \"P3\"") != std::string::npos);
  // 4-layer stack => auto layer is (4*20)/32 = 2.
  CHECK(m1.find("\"inject_layers\": [\n    2\n  ]") != std::string::npos);

  const fs::path o2 = dir / "o2";
  REQUIRE(run_cli("run --config " + cfg.string() + " --scene " + scene +
                  " --out-dir " + o2.string() + " --lambda 0.5")
              .code == 0);
  const std::string m2 = read_file(o2 / "manifest.json");
  CHECK(m2.find("\"lambda\": 0.5") != std::string::npos);
  CHECK(m2.find("\"position\": \"P3\"") != std::string::npos);
}

TEST_CASE("config file errors are usage errors") {
  const fs::path dir = scratch_dir("cfg_err");
  REQUIRE(run_cli("gen-scene --seed 3 --grid 4x4 --objects 2 --dim 16 --out " +
                  dir.string())
              .code == 0);
  const std::string scene = (dir / "scene.json").string();
  const std::string out = (dir / "out").string();

  const fs::path unknown = dir / "unknown.json";
  std::ofstream(unknown, std::ios::binary) << "{\"lambda\": 0.3, \"oops\": 1}";
  const CmdResult r1 = run_cli("run --config " + unknown.string() +
                               " --scene " + scene + " --out-dir " + out);
  CHECK(r1.code == 2);
  CHECK(r1.err.find("oops") != std::string::npos);

  const fs::path broken = dir / "broken.json";
  std::ofstream(broken, std::ios::binary) << "{\"lambda\":";
  CHECK(run_cli("run --config " + broken.string() + " --scene " + scene +
                " --out-dir " + out)
            .code == 2);
  CHECK(run_cli("run --config " + (dir / "missing.json").string() +
                " --scene " + scene + " --out-dir " + out)
            .code == 2);
}

TEST_CASE("ablate writes one data row per seed for a single cell") {
  const fs::path dir = scratch_dir("ablate");
  const fs::path csv = dir / "sweep.csv";
  const CmdResult r = run_cli(
      "ablate --lambdas 0.3 --layers 5 --positions P0 --clips relu "
      "--seeds 0,1,2 --grid 8x8 --objects 2 --dim 16 --out " +
      csv.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("3 data rows") != std::string::npos);
  const std::string text = read_file(csv);
  CHECK(count_lines(text) == 4);  // header + 3 rows
  CHECK(text.rfind("lambda,layers,position,clip,metric,value,seed\n", 0) == 0);
  CHECK(text.find("0.3,5,P0,relu,contrast_delta,") != std::string::npos);

  // Replays identically.
  const fs::path csv2 = dir / "sweep2.csv";
  REQUIRE(run_cli("ablate --lambdas 0.3 --layers 5 --positions P0 "
                  "--clips relu --seeds 0,1,2 --grid 8x8 --objects 2 "
                  "--dim 16 --out " +
                  csv2.string())
              .code == 0);
  CHECK(same_bytes(csv, csv2));
}

TEST_CASE("ablate rejects an empty axis") {
  const fs::path csv = (scratch_dir("ablate_bad") / "x.csv");
  CHECK(run_cli("ablate --lambdas \"\" --out " + csv.string()).code == 2);
  CHECK(run_cli("ablate --lambdas 1.5 --seeds 0 --out " + csv.string()).code ==
        2);
}

TEST_CASE("bench emits its report JSON and validates its arguments") {
  const CmdResult bad = run_cli("bench --n 0");
  CHECK(bad.code == 2);
  CHECK(run_cli("bench --reps 2").code == 2);

  const fs::path dir = scratch_dir("bench");
  const fs::path out = dir / "report.json";
  const CmdResult r = run_cli("bench --n 4 --d 8 --layers 1 --reps 5 "
                              "--warmups 0 --out " +
                              out.string());
  CHECK(r.code == 0);
  CHECK(r.out.rfind("{\"n_patches\": 4, \"d_model\": 8, \"num_layers\": 1, ",
                    0) == 0);
  const std::string file_text = read_file(out);
  CHECK(file_text.find("\"repetitions\": 5") != std::string::npos);
  CHECK(file_text.find("\"threads\": 1") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <path-to-ivra-binary>\n", argv[0]);
    return 1;
  }
  g_cli = argv[1];
  g_scratch = fs::temp_directory_path() /
              ("ivra_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(g_scratch);

  doctest::Context ctx;
  ctx.applyCommandLine(1, argv);  // keep the binary path away from doctest
  const int rc = ctx.run();

  std::error_code ec;
  fs::remove_all(g_scratch, ec);
  return rc;
}
