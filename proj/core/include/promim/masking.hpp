#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promim/encoders.hpp"
#include "promim/random.hpp"

namespace promim {

enum class MaskStrategy { kRandom, kBlock };

std::string_view to_string(MaskStrategy strategy);
MaskStrategy parse_mask_strategy(std::string_view name);

struct MaskSpec {
  MaskStrategy strategy = MaskStrategy::kRandom;
  double ratio = 0.75;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const MaskSpec&) const = default;
};

/// Visible/masked partition of a patch grid. Both lists are sorted.
struct MaskResult {
  std::vector<std::size_t> visible;
  std::vector<std::size_t> masked;
  std::size_t n_patches = 0;

  bool operator==(const MaskResult&) const = default;
};

/// floor(ratio * n_patches), robust to the representation error of ratios
/// such as 0.29.
std::size_t masked_count(std::size_t n_patches, double ratio);

MaskResult sample_random_mask(std::size_t n_patches, double ratio, Rng& rng);

/// Minimum rectangle area and aspect range of the block sampler.
inline constexpr double kBlockMinArea = 4.0;
inline constexpr double kBlockMinAspect = 0.5;
inline constexpr double kBlockMaxAspect = 2.0;

/// Block-wise masking: axis-aligned rectangles are added until the target
/// count is reached, then the cells of the last rectangle are removed in
/// reverse insertion order until exactly floor(ratio * n) remain.
MaskResult sample_block_mask(std::size_t grid_h, std::size_t grid_w, double ratio, Rng& rng);

MaskResult sample_mask(MaskStrategy strategy, std::size_t grid_h, std::size_t grid_w, double ratio,
                       Rng& rng);

struct VisiblePatches {
  std::vector<std::size_t> indices;
  std::vector<double> values;  // indices.size() * patch_dim
  std::size_t patch_dim = 0;
};

VisiblePatches apply_mask(const PatchGrid& grid, const MaskResult& mask);

/// Seed for the evaluation-time mask of one sample.
std::uint64_t eval_mask_seed(std::uint64_t run_seed, std::uint64_t split_id,
                             std::uint64_t sample_index);

/// Number of masked cells that have at least one masked 4-neighbour.
std::size_t masked_adjacency(const MaskResult& mask, std::size_t grid_h, std::size_t grid_w);

}  // namespace promim
