#pragma once

#include <cstddef>
#include <string>

#include "ivra/pipeline.hpp"

namespace ivra {

// Timing summary for one injection configuration against the uninjected
// baseline on the same inputs. Medians over `repetitions` timed pairs after
// `warmups` untimed pairs.
struct BenchReport {
  std::size_t n_patches = 0;
  std::size_t d_model = 0;
  std::size_t num_layers = 0;
  double baseline_ms = 0.0;
  double injected_ms = 0.0;
  double overhead_fraction = 0.0;
  std::size_t repetitions = 0;
  std::size_t warmups = 0;
  // Kernel threads used during the timed runs (1 = the default serial
  // variant; anything else is reported separately, never mixed).
  std::size_t threads = 1;
};

// Single-line JSON with keys n_patches, d_model, num_layers, baseline_ms,
// injected_ms, overhead_fraction, repetitions, warmups, threads.
std::string bench_report_json(const BenchReport& report);

// The fixed inputs a bench run times: a toy encoder (4 layers, d 64,
// patch 4), a decoder stack at the requested width, and a seeded image and
// prompt sized so the sequence carries exactly `n_patches` visual tokens.
// The bench decoder uses mlp_ratio 1 (instead of the toy default 4) so the
// d_model = 4096 acceptance point fits desk-scale memory; that choice makes
// the baseline cheaper and therefore the measured overhead fraction
// conservative (larger), never flattering.
struct BenchFixture {
  ToyEncoder encoder;
  ToyDecoderStack decoder;
  Matrix2D image;
  PromptSpec prompt;
};

BenchFixture make_bench_fixture(std::size_t n_patches, std::size_t d_model,
                                std::size_t num_layers);

// Times run_pipeline with and without `cfg` on identical seeded inputs,
// interleaving baseline/injected repetitions, and reports medians. Requires
// reps >= 5. `threads` > 1 switches the kernels to the parallel row-block
// variant for the timed runs (restored afterwards); the default stays
// single-threaded for timing stability. `injected_tokens_out`, when
// non-null, receives the final token matrix of the last injected repetition
// so callers can verify that benchmarking never alters numerical outputs.
BenchReport run_bench(std::size_t n_patches, std::size_t d_model,
                      std::size_t num_layers, const InjectConfig& cfg,
                      std::size_t reps, std::size_t warmups,
                      std::size_t threads = 1,
                      Matrix2D* injected_tokens_out = nullptr);

}  // namespace ivra
