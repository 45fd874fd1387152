#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ivra/affinity.hpp"
#include "ivra/matrix.hpp"

namespace ivra {

// Where inside a pre-norm transformer block the injection hook fires.
// The block computes: LN1 -> attention -> residual -> LN2 -> MLP -> residual.
//   P0: block input
//   P1: after the attention layernorm (LN1 output)
//   P2: attention output, before the residual add
//   P3: after the attention residual
//   P4: after the MLP layernorm (LN2 output)
enum class HookPosition { P0, P1, P2, P3, P4 };

std::string to_string(HookPosition pos);
HookPosition hook_position_from_string(const std::string& s);

// Token matrix plus the index range holding the visual tokens.
struct TokenSequence {
  Matrix2D tokens;
  std::size_t visual_start = 0;
  std::size_t visual_count = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  std::size_t length() const { return tokens.rows(); }
  std::size_t visual_end() const { return visual_start + visual_count; }
  // Throws if the visual range or grid shape is inconsistent.
  void validate() const;
};

// Full description of an intervention: what to mix (lambda, clip), where in
// the stack (inject_layers), where inside each block (position), and how
// deep in the encoder the affinity features are tapped.
struct InjectConfig {
  MixCoefficient lambda{0.3f};
  std::vector<std::size_t> inject_layers;
  HookPosition position = HookPosition::P0;
  ClipMode clip = ClipMode::relu;
  std::size_t encoder_layer_offset = 2;
};

// One pre-norm transformer block. Attention projections carry no biases;
// the MLP carries biases on both layers. `causal` selects the decoder-style
// lower-triangular attention mask.
struct Block {
  LayerNormParams ln1;
  LayerNormParams ln2;
  Matrix2D wq, wk, wv, wo;
  Matrix2D w1, w2;
  std::vector<float> b1, b2;
  std::size_t num_heads = 1;
  bool causal = false;
};

// Toy vision encoder: patchify -> linear embed -> non-causal pre-norm
// blocks. Weights are drawn deterministically from the seed.
class ToyEncoder {
 public:
  ToyEncoder(std::size_t num_layers, std::size_t d, std::size_t patch_size,
             std::uint64_t seed, std::size_t num_heads = 4,
             std::size_t mlp_ratio = 4);

  std::size_t num_layers() const { return blocks_.size(); }
  std::size_t d() const { return d_; }
  std::size_t patch_size() const { return patch_size_; }
  const Matrix2D& embed_weight() const { return embed_w_; }
  const std::vector<float>& embed_bias() const { return embed_b_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  // Patch grid + linear embedding, before any block.
  PatchEmbeddings embed_image(const Matrix2D& img) const;

 private:
  std::size_t d_;
  std::size_t patch_size_;
  Matrix2D embed_w_;
  std::vector<float> embed_b_;
  std::vector<Block> blocks_;
};

// Toy language-model decoder stack: causal pre-norm blocks operating on a
// token sequence. Weights are drawn deterministically from the seed.
class ToyDecoderStack {
 public:
  ToyDecoderStack(std::size_t num_layers, std::size_t d_model,
                  std::size_t num_heads, std::uint64_t seed,
                  std::size_t mlp_ratio = 4);

  std::size_t num_layers() const { return blocks_.size(); }
  std::size_t d_model() const { return d_model_; }
  std::size_t num_heads() const { return num_heads_; }
  std::size_t mlp_ratio() const { return mlp_ratio_; }
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  std::size_t d_model_;
  std::size_t num_heads_;
  std::size_t mlp_ratio_;
  std::vector<Block> blocks_;
};

// Rewrites the visual-token rows at a hook point; receives and returns an
// (n_visual x d) matrix. Rows outside the visual range never reach a hook.
using TokenHook = std::function<Matrix2D(const Matrix2D&)>;

// Snapshot of the hooked matrix immediately before and after the hook ran,
// for immutability checks. `hooked` is the full matrix at the hook point
// (the block input for P0, LN1 output for P1, and so on).
struct HookCapture {
  std::size_t layer = 0;
  HookPosition position = HookPosition::P0;
  Matrix2D pre;
  Matrix2D post;
};

// Text prompt layout around the single image placeholder. Text tokens are
// seeded deterministic vectors; there is no tokenizer at this scale.
struct PromptSpec {
  std::size_t text_prefix_len = 0;
  std::size_t text_suffix_len = 0;
  std::uint64_t seed = 0;
};

struct RunOptions {
  // Record pre/post hook snapshots for every injected layer.
  bool capture_hook_states = false;
};

struct RunResult {
  TokenSequence sequence;
  // Number of compute_affinity calls made during the run: 1 when a config
  // injects at least one layer (however many layers that is), 0 otherwise.
  std::size_t affinity_computations = 0;
  std::vector<HookCapture> captures;
};

// Runs the encoder and returns the features after layer
// (num_layers - 1 - layer_offset); layer_offset 0 is the final layer.
PatchEmbeddings encode_patches(const Matrix2D& img, const ToyEncoder& enc,
                               std::size_t layer_offset);

// Assembles [prefix text | N visual tokens | suffix text]. Patch features
// pass through unchanged when their width already equals d_model; otherwise
// a fixed seeded linear projection adapts them. d_model = 0 means "use the
// patch feature width".
TokenSequence build_sequence(std::size_t text_prefix_len,
                             const PatchEmbeddings& patches,
                             std::size_t text_suffix_len, std::uint64_t seed,
                             std::size_t d_model = 0);

// One block forward. When `hook` is set it rewrites the visual rows at
// exactly `position`; everything else is the standard pre-norm block.
// `capture`, when non-null and a hook is set, receives the pre/post
// snapshots of the hooked matrix.
TokenSequence run_block_with_hook(const Block& block, const TokenSequence& seq,
                                  const TokenHook& hook, HookPosition position,
                                  HookCapture* capture = nullptr);

// Full pipeline: encode the image, build the sequence, run every decoder
// block. With a config, the affinity map is computed once from the encoder
// tap and the same map drives the hook at every layer in cfg.inject_layers.
RunResult run_pipeline(const Matrix2D& img, const PromptSpec& prompt,
                       const ToyEncoder& enc, const ToyDecoderStack& dec,
                       const std::optional<InjectConfig>& cfg,
                       const RunOptions& options = {});

// Total learnable-weight count of decoder + encoder. Injection adds no
// parameters, so this is independent of any InjectConfig.
std::size_t parameter_count(const ToyDecoderStack& dec, const ToyEncoder& enc);

}  // namespace ivra
