#include "ivra/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace ivra {

namespace {

constexpr char kMagic[4] = {'I', 'V', 'R', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TruncatedError("cannot open '" + path + "' for reading");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValueError("cannot open '" + path + "' for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw ValueError("short write to '" + path + "'");
  }
}

}  // namespace

void write_tensor(const std::string& path, const Matrix2D& m) {
  std::string bytes;
  bytes.reserve(18 + 2 * 8 + m.size() * 4);
  bytes.append(kMagic, 4);
  put_u32(bytes, kVersion);
  bytes.push_back(static_cast<char>(kDtypeF32));
  bytes.push_back(static_cast<char>(2));  // ndim
  put_u64(bytes, m.rows());
  put_u64(bytes, m.cols());
  if constexpr (std::endian::native == std::endian::little) {
    const std::size_t offset = bytes.size();
    bytes.resize(offset + m.size() * 4);
    std::memcpy(bytes.data() + offset, m.data(), m.size() * 4);
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::uint32_t u;
      std::memcpy(&u, m.data() + i, 4);
      put_u32(bytes, u);
    }
  }
  write_file(path, bytes);
}

Matrix2D read_tensor(const std::string& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  if (size < 4 || std::memcmp(p, kMagic, 4) != 0) {
    throw BadMagicError("'" + path + "' is not an IVRT tensor (bad magic)");
  }
  if (size < 10) {
    throw TruncatedError("'" + path + "' ends inside the fixed header");
  }
  const std::uint32_t version = get_u32(p + 4);
  if (version != kVersion) {
    throw VersionMismatchError("'" + path + "' has version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kVersion));
  }
  const std::uint8_t dtype = p[8];
  if (dtype != kDtypeF32) {
    throw DtypeError("'" + path + "' has dtype " + std::to_string(dtype) +
                     ", expected 0 (float32)");
  }
  const std::uint8_t ndim = p[9];
  if (ndim != 2) {
    throw DimsError("'" + path + "' has ndim " + std::to_string(ndim) +
                    ", expected 2");
  }
  if (size < 10 + 16) {
    throw TruncatedError("'" + path + "' ends inside the dims header");
  }
  const std::uint64_t rows = get_u64(p + 10);
  const std::uint64_t cols = get_u64(p + 18);
  if (rows == 0 || cols == 0) {
    throw DimsError("'" + path + "' declares a zero dimension " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (cols > std::numeric_limits<std::uint64_t>::max() / rows ||
      rows * cols > std::numeric_limits<std::uint64_t>::max() / 4 ||
      rows * cols > (static_cast<std::uint64_t>(1) << 40)) {
    throw DimsError("'" + path + "' declares dims " + std::to_string(rows) +
                    "x" + std::to_string(cols) +
                    " whose payload size overflows sane limits");
  }
  const std::uint64_t payload = rows * cols * 4;
  if (size != 26 + payload) {
    throw TruncatedError("'" + path + "' payload is " +
                         std::to_string(size - std::min<std::size_t>(size, 26)) +
                         " bytes, expected " + std::to_string(payload));
  }

  std::vector<float> data(rows * cols);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data.data(), p + 26, payload);
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::uint32_t u = get_u32(p + 26 + i * 4);
      std::memcpy(&data[i], &u, 4);
    }
  }
  return Matrix2D(rows, cols, std::move(data));
}

HeatmapImage write_heatmap(const std::string& path, const AffinityMap& a,
                           std::size_t ref_index) {
  if (ref_index >= a.n) {
    throw ValueError("write_heatmap: ref_index " + std::to_string(ref_index) +
                     " out of range for " + std::to_string(a.n) + " patches");
  }
  if (a.grid_h * a.grid_w != a.n) {
    throw DimensionError("write_heatmap: grid " + std::to_string(a.grid_h) +
                         "x" + std::to_string(a.grid_w) +
                         " does not match n = " + std::to_string(a.n));
  }
  const float* row = a.values.row(ref_index);
  float lo = row[0], hi = row[0];
  for (std::size_t i = 1; i < a.n; ++i) {
    lo = std::min(lo, row[i]);
    hi = std::max(hi, row[i]);
  }

  HeatmapImage img;
  img.width = a.grid_w;
  img.height = a.grid_h;
  img.pixels.resize(a.n);
  if (hi == lo) {
    std::fill(img.pixels.begin(), img.pixels.end(), std::uint8_t{255});
  } else {
    for (std::size_t i = 0; i < a.n; ++i) {
      const float t =
          std::clamp((row[i] - lo) / (hi - lo), 0.0f, 1.0f);
      img.pixels[i] =
          static_cast<std::uint8_t>(std::lround(255.0f * t));
    }
  }

  char header[64];
  const int header_len =
      std::snprintf(header, sizeof(header), "P5\n%zu %zu\n255\n", img.width,
                    img.height);
  std::string bytes(header, static_cast<std::size_t>(header_len));
  bytes.append(reinterpret_cast<const char*>(img.pixels.data()),
               img.pixels.size());
  write_file(path, bytes);
  return img;
}

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRow>& rows) {
  std::string out = "lambda,layers,position,clip,metric,value,seed\n";
  char buf[64];
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6g", r.lambda);
    out += buf;
    out += ',';
    out += r.layers;
    out += ',';
    out += r.position;
    out += ',';
    out += r.clip;
    out += ',';
    out += r.metric;
    out += ',';
    std::snprintf(buf, sizeof(buf), "%.6g", r.value);
    out += buf;
    out += ',';
    out += std::to_string(r.seed);
    out += '\n';
  }
  write_file(path, out);
}

void write_labels(const std::string& path,
                  const std::vector<std::size_t>& labels) {
  std::string out;
  for (std::size_t label : labels) {
    out += std::to_string(label);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<std::size_t> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw TruncatedError("cannot open '" + path + "' for reading");
  }
  std::vector<std::size_t> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    labels.push_back(std::stoull(line));
  }
  return labels;
}

namespace {

void reject_unknown_keys(const nlohmann::json& j,
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
      throw FormatError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

const nlohmann::json& require_key(const nlohmann::json& j, const char* key,
                                  const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw FormatError(where + ": missing key '" + std::string(key) + "'");
  }
  return *it;
}

std::uint64_t json_uint(const nlohmann::json& j, const char* key,
                        const std::string& where) {
  const nlohmann::json& v = require_key(j, key, where);
  if (!v.is_number_unsigned()) {
    throw FormatError(where + ": key '" + std::string(key) +
                      "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double json_real(const nlohmann::json& j, const char* key,
                 const std::string& where) {
  const nlohmann::json& v = require_key(j, key, where);
  if (!v.is_number()) {
    throw FormatError(where + ": key '" + std::string(key) +
                      "' must be a number");
  }
  return v.get<double>();
}

}  // namespace

void write_scene_spec(const std::string& path, const SceneSpec& spec) {
  spec.validate();
  nlohmann::json j;
  j["grid_h"] = spec.grid_h;
  j["grid_w"] = spec.grid_w;
  j["d"] = spec.d;
  j["noise_sigma"] = spec.noise_sigma;
  j["prototype_seed"] = spec.prototype_seed;
  j["noise_seed"] = spec.noise_seed;
  nlohmann::json objects = nlohmann::json::array();
  for (const ObjectRect& o : spec.objects) {
    objects.push_back({{"id", o.id},
                       {"row", o.row},
                       {"col", o.col},
                       {"height", o.height},
                       {"width", o.width}});
  }
  j["objects"] = std::move(objects);
  write_file(path, j.dump(2) + "\n");
}

SceneSpec read_scene_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TruncatedError("cannot open '" + path + "' for reading");
  }
  const std::string where = "scene spec '" + path + "'";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + ": " + e.what());
  }
  if (!j.is_object()) {
    throw FormatError(where + ": top level must be a JSON object");
  }
  reject_unknown_keys(j,
                      {"grid_h", "grid_w", "d", "noise_sigma",
                       "prototype_seed", "noise_seed", "objects"},
                      where);

  SceneSpec spec;
  spec.grid_h = json_uint(j, "grid_h", where);
  spec.grid_w = json_uint(j, "grid_w", where);
  spec.d = json_uint(j, "d", where);
  spec.noise_sigma = static_cast<float>(json_real(j, "noise_sigma", where));
  spec.prototype_seed = json_uint(j, "prototype_seed", where);
  spec.noise_seed = json_uint(j, "noise_seed", where);

  const nlohmann::json& objects = require_key(j, "objects", where);
  if (!objects.is_array()) {
    throw FormatError(where + ": key 'objects' must be an array");
  }
  for (const nlohmann::json& entry : objects) {
    if (!entry.is_object()) {
      throw FormatError(where + ": every object entry must be a JSON object");
    }
    reject_unknown_keys(entry, {"id", "row", "col", "height", "width"}, where);
    ObjectRect rect;
    rect.id = json_uint(entry, "id", where);
    rect.row = json_uint(entry, "row", where);
    rect.col = json_uint(entry, "col", where);
    rect.height = json_uint(entry, "height", where);
    rect.width = json_uint(entry, "width", where);
    spec.objects.push_back(rect);
  }

  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  if (spec.noise_sigma < 0.0f) {
    throw FormatError(where + ": noise_sigma must be non-negative");
  }
  return spec;
}

}  // namespace ivra
