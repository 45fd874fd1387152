#include "ivra/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "ivra/kernels.hpp"
#include "ivra/rng.hpp"

namespace ivra {

namespace {

// Decouples the adapter-projection stream from the text-token stream when
// both derive from the same user seed.
constexpr std::uint64_t kProjectionSalt = 0x9e3779b97f4a7c15ull;

Matrix2D xavier_uniform(SeededRng& rng, std::size_t fan_in,
                        std::size_t fan_out) {
  const float limit =
      std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::vector<float> v(fan_in * fan_out);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Matrix2D(fan_in, fan_out, std::move(v));
}

std::vector<float> small_uniform(SeededRng& rng, std::size_t n, float limit) {
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return v;
}

LayerNormParams random_norm(SeededRng& rng, std::size_t d) {
  LayerNormParams p;
  p.gamma.resize(d);
  p.beta.resize(d);
  for (auto& g : p.gamma) g = rng.uniform(0.9f, 1.1f);
  for (auto& b : p.beta) b = rng.uniform(-0.05f, 0.05f);
  return p;
}

Block make_block(SeededRng& rng, std::size_t d, std::size_t num_heads,
                 std::size_t mlp_ratio, bool causal) {
  Block b;
  b.ln1 = random_norm(rng, d);
  b.wq = xavier_uniform(rng, d, d);
  b.wk = xavier_uniform(rng, d, d);
  b.wv = xavier_uniform(rng, d, d);
  b.wo = xavier_uniform(rng, d, d);
  b.ln2 = random_norm(rng, d);
  const std::size_t hidden = d * mlp_ratio;
  b.w1 = xavier_uniform(rng, d, hidden);
  b.b1 = small_uniform(rng, hidden, 0.02f);
  b.w2 = xavier_uniform(rng, hidden, d);
  b.b2 = small_uniform(rng, d, 0.02f);
  b.num_heads = num_heads;
  b.causal = causal;
  return b;
}

void add_inplace(Matrix2D& dst, const Matrix2D& src) {
  float* d = dst.data();
  const float* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

void add_bias_inplace(Matrix2D& m, const std::vector<float>& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    float* row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias[c];
  }
}

// tanh-approximation GELU.
void gelu_inplace(Matrix2D& m) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  float* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const float x = p[i];
    const float t =
        std::tanh(kSqrt2OverPi * (x + 0.044715f * x * x * x));
    p[i] = 0.5f * x * (1.0f + t);
  }
}

// Multi-head scaled dot-product attention over pre-normalized tokens.
Matrix2D attention(const Matrix2D& xn, const Block& block) {
  const std::size_t t = xn.rows();
  const std::size_t d = xn.cols();
  const std::size_t head_dim = d / block.num_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));

  const Matrix2D q = matmul_blocked(xn, block.wq, default_exec_policy());
  const Matrix2D k = matmul_blocked(xn, block.wk, default_exec_policy());
  const Matrix2D v = matmul_blocked(xn, block.wv, default_exec_policy());

  Matrix2D context(t, d);
  for (std::size_t h = 0; h < block.num_heads; ++h) {
    const std::size_t c0 = h * head_dim;
    const Matrix2D qh = slice_cols(q, c0, c0 + head_dim);
    const Matrix2D kh = slice_cols(k, c0, c0 + head_dim);
    const Matrix2D vh = slice_cols(v, c0, c0 + head_dim);

    Matrix2D scores = matmul_blocked(qh, transpose(kh), default_exec_policy());
    for (std::size_t i = 0; i < t; ++i) {
      float* row = scores.row(i);
      for (std::size_t j = 0; j < t; ++j) row[j] *= scale;
      if (block.causal) {
        for (std::size_t j = i + 1; j < t; ++j) {
          row[j] = -std::numeric_limits<float>::infinity();
        }
      }
    }
    paste_cols(context, c0, matmul_blocked(softmax_rows(scores), vh, default_exec_policy()));
  }
  return matmul_blocked(context, block.wo, default_exec_policy());
}

void check_block_dims(const Block& block, std::size_t d) {
  if (block.wq.rows() != d) {
    throw DimensionError("block expects width " +
                         std::to_string(block.wq.rows()) +
                         " but sequence has width " + std::to_string(d));
  }
}

}  // namespace

std::string to_string(HookPosition pos) {
  switch (pos) {
    case HookPosition::P0: return "P0";
    case HookPosition::P1: return "P1";
    case HookPosition::P2: return "P2";
    case HookPosition::P3: return "P3";
    case HookPosition::P4: return "P4";
  }
  throw ValueError("invalid HookPosition value");
}

HookPosition hook_position_from_string(const std::string& s) {
  if (s == "P0") return HookPosition::P0;
  if (s == "P1") return HookPosition::P1;
  if (s == "P2") return HookPosition::P2;
  if (s == "P3") return HookPosition::P3;
  if (s == "P4") return HookPosition::P4;
  throw ValueError("unknown hook position '" + s + "' (expected P0..P4)");
}

void TokenSequence::validate() const {
  if (visual_count == 0 || visual_end() > tokens.rows()) {
    throw DimensionError(
        "TokenSequence: visual range [" + std::to_string(visual_start) + ", " +
        std::to_string(visual_end()) + ") invalid for " +
        std::to_string(tokens.rows()) + " tokens");
  }
  if (grid_h * grid_w != visual_count) {
    throw DimensionError("TokenSequence: grid " + std::to_string(grid_h) +
                         "x" + std::to_string(grid_w) + " does not match " +
                         std::to_string(visual_count) + " visual tokens");
  }
}

ToyEncoder::ToyEncoder(std::size_t num_layers, std::size_t d,
                       std::size_t patch_size, std::uint64_t seed,
                       std::size_t num_heads, std::size_t mlp_ratio)
    : d_(d), patch_size_(patch_size) {
  if (num_layers == 0 || d == 0 || patch_size == 0) {
    throw ValueError("ToyEncoder: layers, d and patch_size must be >= 1");
  }
  if (d % num_heads != 0) {
    throw DimensionError("ToyEncoder: d " + std::to_string(d) +
                         " not divisible by " + std::to_string(num_heads) +
                         " heads");
  }
  SeededRng rng(seed);
  embed_w_ = xavier_uniform(rng, patch_size * patch_size, d);
  embed_b_ = small_uniform(rng, d, 0.02f);
  blocks_.reserve(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    blocks_.push_back(make_block(rng, d, num_heads, mlp_ratio, false));
  }
}

PatchEmbeddings ToyEncoder::embed_image(const Matrix2D& img) const {
  if (img.rows() % patch_size_ != 0 || img.cols() % patch_size_ != 0) {
    throw DimensionError("image " + img.shape_str() +
                         " is not divisible into " +
                         std::to_string(patch_size_) + "x" +
                         std::to_string(patch_size_) + " patches");
  }
  const std::size_t grid_h = img.rows() / patch_size_;
  const std::size_t grid_w = img.cols() / patch_size_;
  Matrix2D flat(grid_h * grid_w, patch_size_ * patch_size_);
  for (std::size_t gi = 0; gi < grid_h; ++gi) {
    for (std::size_t gj = 0; gj < grid_w; ++gj) {
      float* dst = flat.row(gi * grid_w + gj);
      for (std::size_t pi = 0; pi < patch_size_; ++pi) {
        const float* src = img.row(gi * patch_size_ + pi) + gj * patch_size_;
        std::copy(src, src + patch_size_, dst + pi * patch_size_);
      }
    }
  }
  Matrix2D features = matmul_blocked(flat, embed_w_, default_exec_policy());
  add_bias_inplace(features, embed_b_);
  // source_layer_offset = num_layers marks "before any block".
  return PatchEmbeddings{grid_h, grid_w, std::move(features), blocks_.size()};
}

ToyDecoderStack::ToyDecoderStack(std::size_t num_layers, std::size_t d_model,
                                 std::size_t num_heads, std::uint64_t seed,
                                 std::size_t mlp_ratio)
    : d_model_(d_model), num_heads_(num_heads), mlp_ratio_(mlp_ratio) {
  if (num_layers == 0 || d_model == 0 || num_heads == 0 || mlp_ratio == 0) {
    throw ValueError("ToyDecoderStack: all sizes must be >= 1");
  }
  if (d_model % num_heads != 0) {
    throw DimensionError("ToyDecoderStack: d_model " +
                         std::to_string(d_model) + " not divisible by " +
                         std::to_string(num_heads) + " heads");
  }
  SeededRng rng(seed);
  blocks_.reserve(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    blocks_.push_back(make_block(rng, d_model, num_heads, mlp_ratio, true));
  }
}

PatchEmbeddings encode_patches(const Matrix2D& img, const ToyEncoder& enc,
                               std::size_t layer_offset) {
  if (layer_offset >= enc.num_layers()) {
    throw ValueError("encode_patches: layer_offset " +
                     std::to_string(layer_offset) + " out of range for " +
                     std::to_string(enc.num_layers()) + "-layer encoder");
  }
  PatchEmbeddings p = enc.embed_image(img);
  const std::size_t tap_layer = enc.num_layers() - 1 - layer_offset;
  TokenSequence seq{std::move(p.features), 0, p.grid_h * p.grid_w, p.grid_h,
                    p.grid_w};
  for (std::size_t l = 0; l <= tap_layer; ++l) {
    seq = run_block_with_hook(enc.blocks()[l], seq, nullptr, HookPosition::P0);
  }
  return PatchEmbeddings{p.grid_h, p.grid_w, std::move(seq.tokens),
                         layer_offset};
}

TokenSequence build_sequence(std::size_t text_prefix_len,
                             const PatchEmbeddings& patches,
                             std::size_t text_suffix_len, std::uint64_t seed,
                             std::size_t d_model) {
  patches.validate();
  const std::size_t n = patches.n();
  if (d_model == 0) d_model = patches.d();

  Matrix2D visual;
  if (patches.d() == d_model) {
    visual = patches.features;
  } else {
    SeededRng proj_rng(seed ^ kProjectionSalt);
    visual = matmul_blocked(patches.features,
                            xavier_uniform(proj_rng, patches.d(), d_model),
                            default_exec_policy());
  }

  const std::size_t total = text_prefix_len + n + text_suffix_len;
  Matrix2D tokens(total, d_model);
  SeededRng text_rng(seed);
  for (std::size_t r = 0; r < text_prefix_len; ++r) {
    float* row = tokens.row(r);
    for (std::size_t c = 0; c < d_model; ++c) row[c] = text_rng.uniform(-1.0f, 1.0f);
  }
  paste_rows(tokens, text_prefix_len, visual);
  for (std::size_t r = text_prefix_len + n; r < total; ++r) {
    float* row = tokens.row(r);
    for (std::size_t c = 0; c < d_model; ++c) row[c] = text_rng.uniform(-1.0f, 1.0f);
  }
  return TokenSequence{std::move(tokens), text_prefix_len, n, patches.grid_h,
                       patches.grid_w};
}

TokenSequence run_block_with_hook(const Block& block, const TokenSequence& seq,
                                  const TokenHook& hook, HookPosition position,
                                  HookCapture* capture) {
  seq.validate();
  check_block_dims(block, seq.tokens.cols());

  auto fire = [&](Matrix2D& m, HookPosition here) {
    if (!hook || position != here) return;
    if (capture) {
      capture->position = here;
      capture->pre = m;
    }
    Matrix2D visual = slice_rows(m, seq.visual_start, seq.visual_end());
    Matrix2D rewritten = hook(visual);
    if (!rewritten.same_shape(visual)) {
      throw DimensionError("hook returned " + rewritten.shape_str() +
                           " for a " + visual.shape_str() + " visual block");
    }
    paste_rows(m, seq.visual_start, rewritten);
    if (capture) capture->post = m;
  };

  Matrix2D x = seq.tokens;
  fire(x, HookPosition::P0);
  Matrix2D n1 = layer_norm_rows(x, block.ln1);
  fire(n1, HookPosition::P1);
  Matrix2D attn_out = attention(n1, block);
  fire(attn_out, HookPosition::P2);
  add_inplace(x, attn_out);
  fire(x, HookPosition::P3);
  Matrix2D n2 = layer_norm_rows(x, block.ln2);
  fire(n2, HookPosition::P4);
  Matrix2D hidden = matmul_blocked(n2, block.w1, default_exec_policy());
  add_bias_inplace(hidden, block.b1);
  gelu_inplace(hidden);
  Matrix2D mlp_out = matmul_blocked(hidden, block.w2, default_exec_policy());
  add_bias_inplace(mlp_out, block.b2);
  add_inplace(x, mlp_out);
  return TokenSequence{std::move(x), seq.visual_start, seq.visual_count,
                       seq.grid_h, seq.grid_w};
}

RunResult run_pipeline(const Matrix2D& img, const PromptSpec& prompt,
                       const ToyEncoder& enc, const ToyDecoderStack& dec,
                       const std::optional<InjectConfig>& cfg,
                       const RunOptions& options) {
  if (cfg) {
    for (std::size_t layer : cfg->inject_layers) {
      if (layer >= dec.num_layers()) {
        throw ValueError("inject layer " + std::to_string(layer) +
                         " out of range for " +
                         std::to_string(dec.num_layers()) + "-layer stack");
      }
    }
  }

  RunResult result;
  // Steps 1-2: encode the image and splice the final-layer features into
  // the prompt. The affinity tap reuses the same forward pass prefix via
  // encode_patches, which stops at the tap layer.
  PatchEmbeddings final_patches = encode_patches(img, enc, 0);
  TokenSequence seq = build_sequence(prompt.text_prefix_len, final_patches,
                                     prompt.text_suffix_len, prompt.seed,
                                     dec.d_model());

  // Step 3: one affinity map per run, shared by all injected layers.
  AffinityMap affinity;
  TokenHook hook;
  if (cfg && !cfg->inject_layers.empty()) {
    PatchEmbeddings tap = encode_patches(img, enc, cfg->encoder_layer_offset);
    affinity = compute_affinity(tap);
    result.affinity_computations = 1;
    hook = [&affinity, &cfg](const Matrix2D& visual) {
      return apply_ivra_to_tokens(visual, affinity, cfg->lambda, cfg->clip);
    };
  }

  // Steps 4-6: run every block, firing the hook at the configured layers.
  for (std::size_t l = 0; l < dec.num_layers(); ++l) {
    const bool inject =
        hook && std::find(cfg->inject_layers.begin(), cfg->inject_layers.end(),
                          l) != cfg->inject_layers.end();
    if (inject && options.capture_hook_states) {
      HookCapture capture;
      capture.layer = l;
      seq = run_block_with_hook(dec.blocks()[l], seq, hook, cfg->position,
                                &capture);
      result.captures.push_back(std::move(capture));
    } else {
      seq = run_block_with_hook(dec.blocks()[l], seq, inject ? hook : nullptr,
                                cfg ? cfg->position : HookPosition::P0);
    }
  }
  result.sequence = std::move(seq);
  return result;
}

std::size_t parameter_count(const ToyDecoderStack& dec, const ToyEncoder& enc) {
  auto block_params = [](const Block& b) {
    return b.ln1.gamma.size() + b.ln1.beta.size() + b.ln2.gamma.size() +
           b.ln2.beta.size() + b.wq.size() + b.wk.size() + b.wv.size() +
           b.wo.size() + b.w1.size() + b.b1.size() + b.w2.size() +
           b.b2.size();
  };
  std::size_t total = enc.embed_weight().size() + enc.embed_bias().size();
  for (const Block& b : enc.blocks()) total += block_params(b);
  for (const Block& b : dec.blocks()) total += block_params(b);
  return total;
}

}  // namespace ivra
