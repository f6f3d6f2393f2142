#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promim/encoders.hpp"
#include "promim/random.hpp"
#include "promim/tensor.hpp"

namespace promim {

enum class PromptMethod { kHandcrafted, kCoop, kCocoop, kPromim };

std::string_view to_string(PromptMethod method);
PromptMethod parse_prompt_method(std::string_view name);

inline constexpr std::size_t kDefaultContextLength = 4;
inline constexpr double kContextInitStd = 0.02;
inline constexpr std::size_t kDefaultMetaReduction = 4;

/// Learnable context vectors v_1..v_M, stored as one [M, embed_dim] leaf.
struct ContextTokens {
  Tensor vectors;

  static ContextTokens gaussian(std::size_t count, std::size_t embed_dim, Rng& rng,
                                double stddev = kContextInitStd);
  std::size_t count() const { return vectors.dim(0); }
};

/// Bottleneck network from an image embedding to the meta-token:
/// Linear(output_dim -> output_dim / r) -> ReLU -> Linear(-> embed_dim).
struct MetaNet {
  Tensor w1, b1, w2, b2;
  std::size_t reduction = kDefaultMetaReduction;

  /// Second layer starts at zero so the initial meta-token is exactly 0.
  static MetaNet initialize(std::size_t input_dim, std::size_t embed_dim, Rng& rng,
                            std::size_t reduction = kDefaultMetaReduction);
  std::size_t input_dim() const { return w1.dim(0); }
  std::size_t output_dim() const { return w2.dim(1); }
  std::vector<Tensor> parameters() const { return {w1, b1, w2, b2}; }
};

/// pi = h_theta(image_embedding), a vector of embed_dim.
Tensor meta_forward(const MetaNet& net, const Tensor& image_embedding);

/// Per-class prompts. Every class shares the same soft prefix.
struct PromptSet {
  PromptMethod method = PromptMethod::kCoop;
  Tensor prefix;  // [M, embed_dim]
  std::vector<std::string> class_names;
  std::vector<std::vector<TokenId>> class_tokens;

  std::size_t size() const { return class_names.size(); }
};

/// Prefix m of every class is v_m + pi when pi is given, v_m otherwise.
PromptSet assemble_prompts(const DualEncoder& encoder, const ContextTokens& ctx,
                           const std::optional<Tensor>& meta_token,
                           const std::vector<std::string>& classes, PromptMethod method);

/// Prompts whose prefix is the embedded "a photo of a" words.
PromptSet handcrafted_prompts(const DualEncoder& encoder, const std::vector<std::string>& classes);

/// L2-normalized text embeddings of the hand-crafted template, one row per class.
struct ReferenceEmbeddings {
  std::vector<std::string> class_names;
  Tensor embeddings;  // [C, output_dim], constant, L2-normalized by default
  std::uint64_t checksum = 0;
};

/// `normalized = false` keeps the raw text-encoder outputs (unit norm is
/// then not guaranteed).
ReferenceEmbeddings compute_reference_embeddings(const DualEncoder& encoder,
                                                 const std::vector<std::string>& classes,
                                                 bool normalized = true);

/// L2-normalized g(t_i) for every prompt, [C, output_dim]; differentiable
/// with respect to the prefix.
Tensor encode_prompt_set(const DualEncoder& encoder, const PromptSet& prompts);

}  // namespace promim
