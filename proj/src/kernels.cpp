#include "ivra/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <thread>
#include <vector>

namespace ivra {

namespace {

std::atomic<std::size_t> g_default_block{64};
std::atomic<std::size_t> g_default_threads{1};

void check_matmul_shapes(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape_str() +
                         " * " + b.shape_str());
  }
}

// Register micro-tile: MR output rows x NR output columns (NR = 4 AVX-512
// lanes' worth). Accumulators live in registers for the whole k sweep.
constexpr std::size_t kMicroRows = 6;
constexpr std::size_t kMicroCols = 64;

// Computes out[i0..i0+MR) x [j0..j0+NR) from a packed k-major panel
// (panel[k*panel_width + j] == b(k, j0_panel + j)). k runs 0..K ascending
// with one accumulator per element, so the float op sequence matches the
// naive kernel exactly.
void microkernel_full(const Matrix2D& a, const float* panel,
                      std::size_t panel_width, std::size_t panel_j,
                      Matrix2D& out, std::size_t i0, std::size_t j0) {
  const std::size_t k_dim = a.cols();
  float acc[kMicroRows][kMicroCols] = {};
  const float* a_rows[kMicroRows];
  for (std::size_t ii = 0; ii < kMicroRows; ++ii) a_rows[ii] = a.row(i0 + ii);
  const float* bp = panel + (j0 - panel_j);
  for (std::size_t k = 0; k < k_dim; ++k, bp += panel_width) {
    for (std::size_t ii = 0; ii < kMicroRows; ++ii) {
      const float a_ik = a_rows[ii][k];
      for (std::size_t j = 0; j < kMicroCols; ++j) {
        acc[ii][j] += a_ik * bp[j];
      }
    }
  }
  for (std::size_t ii = 0; ii < kMicroRows; ++ii) {
    std::memcpy(out.row(i0 + ii) + j0, acc[ii], kMicroCols * sizeof(float));
  }
}

// Edge tile of arbitrary height/width; same accumulation order, just without
// the compile-time-sized accumulator block.
void microkernel_edge(const Matrix2D& a, const float* panel,
                      std::size_t panel_width, std::size_t panel_j,
                      Matrix2D& out, std::size_t i0, std::size_t rows,
                      std::size_t j0, std::size_t cols) {
  const std::size_t k_dim = a.cols();
  std::vector<float> acc(cols);
  for (std::size_t ii = 0; ii < rows; ++ii) {
    std::fill(acc.begin(), acc.end(), 0.0f);
    const float* a_row = a.row(i0 + ii);
    const float* bp = panel + (j0 - panel_j);
    for (std::size_t k = 0; k < k_dim; ++k, bp += panel_width) {
      const float a_ik = a_row[k];
      for (std::size_t j = 0; j < cols; ++j) acc[j] += a_ik * bp[j];
    }
    std::memcpy(out.row(i0 + ii) + j0, acc.data(), cols * sizeof(float));
  }
}

// Processes rows [row_begin, row_end) against one packed panel covering
// columns [panel_j, panel_j + panel_width).
void run_panel_rows(const Matrix2D& a, const float* panel,
                    std::size_t panel_width, std::size_t panel_j, Matrix2D& out,
                    std::size_t row_begin, std::size_t row_end) {
  const std::size_t full_j_end =
      panel_j + (panel_width / kMicroCols) * kMicroCols;
  std::size_t i = row_begin;
  for (; i + kMicroRows <= row_end; i += kMicroRows) {
    for (std::size_t j = panel_j; j < full_j_end; j += kMicroCols) {
      microkernel_full(a, panel, panel_width, panel_j, out, i, j);
    }
    if (full_j_end < panel_j + panel_width) {
      microkernel_edge(a, panel, panel_width, panel_j, out, i, kMicroRows,
                       full_j_end, panel_j + panel_width - full_j_end);
    }
  }
  if (i < row_end) {
    microkernel_edge(a, panel, panel_width, panel_j, out, i, row_end - i,
                     panel_j, panel_width);
  }
}

}  // namespace

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  check_matmul_shapes(a, b);
  Matrix2D out(a.rows(), b.cols());
  const std::size_t k_dim = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const float* a_row = a.row(i);
    float* out_row = out.row(i);
    for (std::size_t k = 0; k < k_dim; ++k) {
      const float a_ik = a_row[k];
      const float* b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out_row[j] += a_ik * b_row[j];
      }
    }
  }
  return out;
}

Matrix2D matmul_blocked(const Matrix2D& a, const Matrix2D& b,
                        const ExecPolicy& policy) {
  check_matmul_shapes(a, b);
  if (policy.block == 0) {
    throw ValueError("matmul_blocked: block size must be >= 1");
  }
  Matrix2D out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  const std::size_t k_dim = b.rows();
  const std::size_t threads =
      std::min(std::max<std::size_t>(policy.threads, 1), a.rows());
  std::vector<float> panel;
  for (std::size_t j0 = 0; j0 < n; j0 += policy.block) {
    const std::size_t jw = std::min(policy.block, n - j0);
    // Pack b's column panel contiguously (k-major). Consecutive k rows of b
    // are a full matrix row apart in memory, which defeats the hardware
    // prefetcher; the packed copy makes the inner loops stream linearly.
    panel.resize(k_dim * jw);
    for (std::size_t k = 0; k < k_dim; ++k) {
      std::memcpy(panel.data() + k * jw, b.row(k) + j0, jw * sizeof(float));
    }
    if (threads <= 1) {
      run_panel_rows(a, panel.data(), jw, j0, out, 0, a.rows());
      continue;
    }
    // Disjoint contiguous row ranges; each output element is written by
    // exactly one thread with the serial accumulation order.
    std::vector<std::thread> workers;
    workers.reserve(threads);
    const std::size_t chunk = (a.rows() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(begin + chunk, a.rows());
      if (begin >= end) break;
      workers.emplace_back([&, begin, end] {
        run_panel_rows(a, panel.data(), jw, j0, out, begin, end);
      });
    }
    for (auto& w : workers) w.join();
  }
  return out;
}

ExecPolicy default_exec_policy() {
  return ExecPolicy{g_default_block.load(std::memory_order_relaxed),
                    g_default_threads.load(std::memory_order_relaxed)};
}

void set_default_exec_policy(const ExecPolicy& policy) {
  if (policy.block == 0) {
    throw ValueError("set_default_exec_policy: block size must be >= 1");
  }
  g_default_block.store(policy.block, std::memory_order_relaxed);
  g_default_threads.store(std::max<std::size_t>(policy.threads, 1),
                          std::memory_order_relaxed);
}

Matrix2D transpose(const Matrix2D& m) {
  Matrix2D out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const float* src = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(j, i) = src[j];
    }
  }
  return out;
}

Matrix2D layer_norm_rows(const Matrix2D& m, const LayerNormParams& params) {
  if (params.gamma.size() != m.cols() || params.beta.size() != m.cols()) {
    throw DimensionError(
        "layer_norm_rows: gamma/beta length " +
        std::to_string(params.gamma.size()) + "/" +
        std::to_string(params.beta.size()) + " does not match row width " +
        std::to_string(m.cols()));
  }
  if (params.epsilon <= 0.0f) {
    throw ValueError("layer_norm_rows: epsilon must be positive");
  }
  Matrix2D out(m.rows(), m.cols());
  const std::size_t d = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const float* src = m.row(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) sum += src[j];
    const double mean = sum / static_cast<double>(d);
    double var_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = src[j] - mean;
      var_sum += delta * delta;
    }
    const double variance = var_sum / static_cast<double>(d);
    const float inv_std =
        1.0f / std::sqrt(static_cast<float>(variance) + params.epsilon);
    const float mean_f = static_cast<float>(mean);
    float* dst = out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = (src[j] - mean_f) * inv_std * params.gamma[j] + params.beta[j];
    }
  }
  return out;
}

Matrix2D softmax_rows(const Matrix2D& m) {
  Matrix2D out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const float* src = m.row(i);
    float* dst = out.row(i);
    float row_max = src[0];
    for (std::size_t j = 1; j < m.cols(); ++j) {
      row_max = std::max(row_max, src[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const float e = std::exp(src[j] - row_max);
      dst[j] = e;
      denom += e;
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      dst[j] *= inv;
    }
  }
  return out;
}

}  // namespace ivra
