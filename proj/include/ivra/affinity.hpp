#pragma once

#include <cstddef>
#include <string>

#include "ivra/matrix.hpp"

namespace ivra {

// Patch features tapped from an intermediate encoder layer, one row per
// patch in row-major grid order.
struct PatchEmbeddings {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  Matrix2D features;
  // How many blocks before the encoder's final layer the features were
  // tapped (0 = final layer).
  std::size_t source_layer_offset = 0;

  std::size_t n() const { return features.rows(); }
  std::size_t d() const { return features.cols(); }
  // Throws if rows != grid_h * grid_w.
  void validate() const;
};

// Pairwise cosine similarities between patches. Symmetric with unit
// diagonal; entries in [-1, 1] up to rounding.
struct AffinityMap {
  std::size_t n = 0;
  Matrix2D values;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
};

// Row-stochastic mixing matrix derived from an AffinityMap. Under relu
// clipping every entry is in [0, 1], each row sums to 1, and the diagonal
// is strictly positive.
struct PoolingWeights {
  std::size_t n = 0;
  Matrix2D values;
};

// Convex blend coefficient; validated to [0, 1] at construction.
class MixCoefficient {
 public:
  explicit MixCoefficient(float lambda);
  float value() const { return lambda_; }

 private:
  float lambda_;
};

// How negative affinities are treated when forming pooling weights. `relu`
// is the standard mode (negatives contribute zero); `none` normalizes raw
// affinities and exists for ablation comparisons only.
enum class ClipMode { relu, none };

std::string to_string(ClipMode mode);
ClipMode clip_mode_from_string(const std::string& s);

// Pairwise cosine-similarity map: values[i][j] = (f_i . f_j)/(|f_i||f_j|),
// accumulated in double and mirrored so symmetry is exact. A zero-norm
// patch is a hard error naming the patch index.
AffinityMap compute_affinity(const PatchEmbeddings& p);

// Row-normalized pooling weights: with relu clipping,
// w[i][j] = max(a[i][j], 0) / sum_k max(a[i][k], 0). With clip=none the raw
// affinities are normalized instead, which fails if a row sum is not
// safely positive.
PoolingWeights pooling_weights(const AffinityMap& a,
                               ClipMode clip = ClipMode::relu);

// Weighted pooling v' = W x v: each output token is a convex combination of
// the input tokens (under relu weights).
Matrix2D pool_tokens(const PoolingWeights& w, const Matrix2D& v);

// Convex blend (1 - lambda) * v + lambda * v_pooled. The endpoints return
// exact copies: lambda=0 is bit-identical to v, lambda=1 to v_pooled.
Matrix2D mix_tokens(const Matrix2D& v, const Matrix2D& v_pooled,
                    MixCoefficient lam);

// Full intervention on a token block: pooling_weights -> pool_tokens ->
// mix_tokens.
Matrix2D apply_ivra_to_tokens(const Matrix2D& v, const AffinityMap& a,
                              MixCoefficient lam,
                              ClipMode clip = ClipMode::relu);

}  // namespace ivra
