#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "promim/tensor.hpp"
#include "promim/vocabulary.hpp"

namespace promim {

/// Shape of the dual encoder. Defaults are the desk-scale configuration:
/// 16x16 single-channel images cut into a 4x4 grid of 4x4 patches.
struct EncoderConfig {
  std::size_t image_side = 16;
  std::size_t channels = 1;
  std::size_t patch_size = 4;
  std::size_t embed_dim = 32;
  std::size_t depth = 2;
  std::size_t heads = 2;
  std::size_t mlp_ratio = 4;
  std::size_t text_vocab_size = 64;
  std::size_t max_text_len = 12;
  std::size_t output_dim = 32;

  void validate() const;
  std::size_t grid_side() const { return image_side / patch_size; }
  std::size_t n_patches() const { return grid_side() * grid_side(); }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }

  bool operator==(const EncoderConfig&) const = default;
};

/// Square image, row-major with interleaved channels: pixels[(y*side + x)*channels + c].
struct Image {
  std::size_t side = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return pixels[(y * side + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * side + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

/// Non-overlapping patches in row-major grid order, each flattened
/// (row, column, channel) into `patch_dim` values.
struct PatchGrid {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t patch_dim = 0;
  std::vector<double> values;  // size() * patch_dim

  std::size_t size() const { return grid_h * grid_w; }
  std::span<const double> patch(std::size_t index) const {
    return std::span<const double>(values).subspan(index * patch_dim, patch_dim);
  }
};

PatchGrid patchify(const Image& image, std::size_t patch_size);
Image unpatchify(const PatchGrid& grid, std::size_t patch_size, std::size_t channels);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Pre-LN transformer block parameters.
struct TransformerBlock {
  Tensor ln1_gain, ln1_bias;
  Tensor qkv_weight, qkv_bias;
  Tensor out_weight, out_bias;
  Tensor ln2_gain, ln2_bias;
  Tensor fc1_weight, fc1_bias;
  Tensor fc2_weight, fc2_bias;
};

struct VisionTower {
  Tensor patch_weight, patch_bias;  // [patch_dim, E], [E]
  Tensor class_token;               // [1, E]
  Tensor positions;                 // [1 + n_patches, E]; row 0 is the class token slot
  std::vector<TransformerBlock> blocks;
  Tensor ln_gain, ln_bias;
  Tensor projection;                // [E, output_dim]
};

struct TextTower {
  Tensor token_embedding;  // [vocab, E]
  Tensor positions;        // [max_text_len, E]
  std::vector<TransformerBlock> blocks;
  Tensor ln_gain, ln_bias;
  Tensor projection;       // [E, output_dim]
};

/// Image/text transformer pair standing in for a pretrained CLIP model.
///
/// Copies share parameter storage. After freeze() no parameter requires
/// gradients, and concurrent read-only forward passes are safe.
class DualEncoder {
 public:
  static DualEncoder initialize(const EncoderConfig& config, std::uint64_t seed,
                                std::shared_ptr<const Vocabulary> vocabulary = Vocabulary::standard());

  const EncoderConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return *vocabulary_; }
  std::shared_ptr<const Vocabulary> shared_vocabulary() const { return vocabulary_; }
  const VisionTower& vision() const { return vision_; }
  const TextTower& text() const { return text_; }

  /// log(1/tau); learned during pretraining.
  const Tensor& logit_scale() const { return logit_scale_; }
  double tau() const;

  /// All parameters (including logit_scale) in a fixed, named order.
  std::vector<NamedTensor> parameters() const;

  void freeze();
  bool frozen() const { return frozen_; }
  void set_frozen_flag(bool frozen) { frozen_ = frozen; }
  std::uint64_t checksum() const;

 private:
  DualEncoder() = default;

  EncoderConfig config_;
  std::shared_ptr<const Vocabulary> vocabulary_;
  VisionTower vision_;
  TextTower text_;
  Tensor logit_scale_;
  bool frozen_ = false;
};

struct VisionEncoding {
  Tensor embedding;                // [output_dim], not normalized
  std::size_t tokens_processed = 0;  // |visible| + 1 class-summary token
};

struct VisionBatchEncoding {
  Tensor embeddings;               // [batch, output_dim]
  std::size_t tokens_processed = 0;
};

/// Encodes only the listed patches (sorted indices into the grid).
VisionEncoding vision_encode(const DualEncoder& encoder, const PatchGrid& grid,
                             std::span<const std::size_t> visible);
/// Encodes every patch.
VisionEncoding vision_encode(const DualEncoder& encoder, const PatchGrid& grid);
/// Batched form; every visible set must have the same size.
VisionBatchEncoding vision_encode_batch(const DualEncoder& encoder,
                                        std::span<const PatchGrid> grids,
                                        std::span<const std::vector<std::size_t>> visible);

/// Text embedding of a token sequence; an end-of-text token is appended and
/// its final hidden state is projected. Result is [output_dim], not normalized.
Tensor text_encode(const DualEncoder& encoder, std::span<const TokenId> tokens);
Tensor text_encode_batch(const DualEncoder& encoder,
                         std::span<const std::vector<TokenId>> sequences);

/// Like text_encode, but the first M positions take the rows of `prefix`
/// ([M, embed_dim]) instead of embedding-table rows.
Tensor text_encode_soft(const DualEncoder& encoder, const Tensor& prefix,
                        std::span<const TokenId> class_tokens);
/// One shared prefix, many class token sequences; returns [count, output_dim].
Tensor text_encode_soft_batch(const DualEncoder& encoder, const Tensor& prefix,
                              std::span<const std::vector<TokenId>> class_tokens);

/// Symmetric InfoNCE over the N x N similarity matrix of L2-normalized
/// embeddings; logits are similarities times `inverse_tau` (a scalar tensor).
Tensor contrastive_pretrain_loss(const Tensor& image_embs, const Tensor& text_embs,
                                 const Tensor& inverse_tau);
Tensor contrastive_pretrain_loss(const Tensor& image_embs, const Tensor& text_embs, double tau);

}  // namespace promim
