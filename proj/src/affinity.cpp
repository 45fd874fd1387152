#include "ivra/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ivra/kernels.hpp"

namespace ivra {

void PatchEmbeddings::validate() const {
  if (features.rows() != grid_h * grid_w) {
    throw DimensionError("PatchEmbeddings: " + std::to_string(features.rows()) +
                         " rows but grid is " + std::to_string(grid_h) + "x" +
                         std::to_string(grid_w));
  }
}

MixCoefficient::MixCoefficient(float lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0f && lambda <= 1.0f)) {
    throw ValueError("MixCoefficient: lambda must be in [0, 1], got " +
                     std::to_string(lambda));
  }
}

std::string to_string(ClipMode mode) {
  return mode == ClipMode::relu ? "relu" : "none";
}

ClipMode clip_mode_from_string(const std::string& s) {
  if (s == "relu") return ClipMode::relu;
  if (s == "none") return ClipMode::none;
  throw ValueError("unknown clip mode '" + s + "' (expected relu or none)");
}

AffinityMap compute_affinity(const PatchEmbeddings& p) {
  p.validate();
  const std::size_t n = p.n();
  const std::size_t d = p.d();
  const Matrix2D& f = p.features;

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = f.row(i);
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      sq += static_cast<double>(row[k]) * static_cast<double>(row[k]);
    }
    if (sq == 0.0) {
      throw ValueError("compute_affinity: patch " + std::to_string(i) +
                       " has zero norm");
    }
    norms[i] = std::sqrt(sq);
  }

  // Cosines are computed once per unordered pair and mirrored. The dot
  // product of (i, j) and (j, i) is the same float-multiply sequence either
  // way, so the mirror equals the symmetrized average exactly.
  Matrix2D values(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* fi = f.row(i);
    for (std::size_t j = i; j < n; ++j) {
      const float* fj = f.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        dot += static_cast<double>(fi[k]) * static_cast<double>(fj[k]);
      }
      const float a = static_cast<float>(dot / (norms[i] * norms[j]));
      values(i, j) = a;
      values(j, i) = a;
    }
  }
  return AffinityMap{n, std::move(values), p.grid_h, p.grid_w};
}

PoolingWeights pooling_weights(const AffinityMap& a, ClipMode clip) {
  if (a.values.rows() != a.n || a.values.cols() != a.n) {
    throw DimensionError("pooling_weights: affinity values are " +
                         a.values.shape_str() + " but n is " +
                         std::to_string(a.n));
  }
  Matrix2D w(a.n, a.n);
  for (std::size_t i = 0; i < a.n; ++i) {
    const float* src = a.values.row(i);
    float* dst = w.row(i);
    double row_sum = 0.0;
    if (clip == ClipMode::relu) {
      for (std::size_t j = 0; j < a.n; ++j) {
        dst[j] = std::max(src[j], 0.0f);
        row_sum += dst[j];
      }
    } else {
      for (std::size_t j = 0; j < a.n; ++j) {
        dst[j] = src[j];
        row_sum += dst[j];
      }
      if (row_sum <= 1e-6) {
        throw ValueError("pooling_weights: clip=none row " +
                         std::to_string(i) +
                         " sums to a non-positive value; cannot normalize");
      }
    }
    for (std::size_t j = 0; j < a.n; ++j) {
      dst[j] = static_cast<float>(dst[j] / row_sum);
    }
  }
  return PoolingWeights{a.n, std::move(w)};
}

Matrix2D pool_tokens(const PoolingWeights& w, const Matrix2D& v) {
  if (v.rows() != w.n) {
    throw DimensionError("pool_tokens: weights are for " +
                         std::to_string(w.n) + " tokens but v is " +
                         v.shape_str());
  }
  return matmul_blocked(w.values, v, default_exec_policy());
}

Matrix2D mix_tokens(const Matrix2D& v, const Matrix2D& v_pooled,
                    MixCoefficient lam) {
  if (!v.same_shape(v_pooled)) {
    throw DimensionError("mix_tokens: shapes differ, " + v.shape_str() +
                         " vs " + v_pooled.shape_str());
  }
  const float lambda = lam.value();
  // Exact convex endpoints: return the operand itself rather than trusting
  // (1-lambda)*v + lambda*v' to preserve every bit (it flips signed zeros).
  if (lambda == 0.0f) return v;
  if (lambda == 1.0f) return v_pooled;
  const float keep = 1.0f - lambda;
  Matrix2D out(v.rows(), v.cols());
  const float* pv = v.data();
  const float* pp = v_pooled.data();
  float* po = out.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    po[i] = keep * pv[i] + lambda * pp[i];
  }
  return out;
}

Matrix2D apply_ivra_to_tokens(const Matrix2D& v, const AffinityMap& a,
                              MixCoefficient lam, ClipMode clip) {
  return mix_tokens(v, pool_tokens(pooling_weights(a, clip), v), lam);
}

}  // namespace ivra
