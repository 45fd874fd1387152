#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivra/affinity.hpp"
#include "ivra/matrix.hpp"
#include "ivra/scenes.hpp"

namespace ivra {

// Base class for malformed-file errors; subclasses identify what exactly
// was wrong so callers (and tests) can tell the cases apart.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};
class DtypeError : public FormatError {
 public:
  using FormatError::FormatError;
};
class DimsError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Binary tensor container ("IVRT"): magic "IVRT", u32 version = 1, u8 dtype
// (0 = float32), u8 ndim, ndim x u64 dims, then row-major float32 payload.
// Every multi-byte field is little-endian regardless of host order.
void write_tensor(const std::string& path, const Matrix2D& m);
Matrix2D read_tensor(const std::string& path);

// 8-bit grayscale image emitted as a binary PGM (P5).
struct HeatmapImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Renders row `ref_index` of the affinity map on its patch grid: values map
// through v -> round(255 * clamp((v - min)/(max - min), 0, 1)) with min/max
// taken over the row; a constant row maps to all-255. Writes a P5 graymap
// and returns the pixel data.
HeatmapImage write_heatmap(const std::string& path, const AffinityMap& a,
                           std::size_t ref_index);

// One record of an ablation sweep.
struct AblationRow {
  double lambda = 0.0;
  std::string layers;
  std::string position;
  std::string clip;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

// CSV with header "lambda,layers,position,clip,metric,value,seed"; reals
// use 6 significant digits; rows keep their input order.
void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRow>& rows);

// Plain-text label vector: one integer per line.
void write_labels(const std::string& path,
                  const std::vector<std::size_t>& labels);
std::vector<std::size_t> read_labels(const std::string& path);

// Scene description as JSON with keys grid_h, grid_w, d, noise_sigma,
// prototype_seed, noise_seed and objects = [{id, row, col, height, width}].
// Reading rejects unknown keys and validates the result; malformed JSON and
// wrong value types surface as FormatError.
void write_scene_spec(const std::string& path, const SceneSpec& spec);
SceneSpec read_scene_spec(const std::string& path);

}  // namespace ivra

