#include "promim/masking.hpp"

#include <algorithm>
#include <cmath>

#include "promim/error.hpp"

namespace promim {

namespace {

constexpr std::string_view kModule = "masking";

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    raise(ErrorKind::kInput, kModule, "mask ratio " + std::to_string(ratio) + " outside [0, 1)");
  }
}

MaskResult from_flags(const std::vector<char>& is_masked) {
  MaskResult r;
  r.n_patches = is_masked.size();
  for (std::size_t i = 0; i < is_masked.size(); ++i) {
    (is_masked[i] ? r.masked : r.visible).push_back(i);
  }
  return r;
}

}  // namespace

std::string_view to_string(MaskStrategy strategy) {
  return strategy == MaskStrategy::kRandom ? "random" : "block";
}

MaskStrategy parse_mask_strategy(std::string_view name) {
  if (name == "random") return MaskStrategy::kRandom;
  if (name == "block") return MaskStrategy::kBlock;
  raise(ErrorKind::kInput, kModule, "unknown mask strategy '" + std::string(name) + "'");
}

void MaskSpec::validate() const { check_ratio(ratio); }

std::size_t masked_count(std::size_t n_patches, double ratio) {
  check_ratio(ratio);
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_patches) + 1e-9));
}

MaskResult sample_random_mask(std::size_t n_patches, double ratio, Rng& rng) {
  if (n_patches == 0) raise(ErrorKind::kInput, kModule, "cannot mask an empty grid");
  const std::size_t k = masked_count(n_patches, ratio);
  std::vector<std::size_t> order(n_patches);
  for (std::size_t i = 0; i < n_patches; ++i) order[i] = i;
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_patches - i));
    std::swap(order[i], order[j]);
  }
  std::vector<char> flags(n_patches, 0);
  for (std::size_t i = 0; i < k; ++i) flags[order[i]] = 1;
  return from_flags(flags);
}

MaskResult sample_block_mask(std::size_t grid_h, std::size_t grid_w, double ratio, Rng& rng) {
  const std::size_t n = grid_h * grid_w;
  if (n == 0) raise(ErrorKind::kInput, kModule, "cannot mask an empty grid");
  const std::size_t target = masked_count(n, ratio);
  std::vector<char> flags(n, 0);
  std::size_t count = 0;
  const double max_area = std::max(kBlockMinArea, static_cast<double>(n));
  const double log_lo = std::log(kBlockMinAspect), log_hi = std::log(kBlockMaxAspect);

  constexpr int kMaxAttempts = 10000;
  int attempts = 0;
  std::vector<std::size_t> last_added;
  while (count < target && attempts < kMaxAttempts) {
    ++attempts;
    const double area = rng.uniform(kBlockMinArea, max_area);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto h = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(std::sqrt(area * aspect))), 1, grid_h);
    const auto w = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(std::sqrt(area / aspect))), 1, grid_w);
    const std::size_t top = rng.below(grid_h - h + 1);
    const std::size_t left = rng.below(grid_w - w + 1);
    std::vector<std::size_t> added;
    for (std::size_t y = top; y < top + h; ++y)
      for (std::size_t x = left; x < left + w; ++x) {
        const std::size_t idx = y * grid_w + x;
        if (!flags[idx]) {
          flags[idx] = 1;
          added.push_back(idx);
        }
      }
    if (!added.empty()) {
      count += added.size();
      last_added = std::move(added);
    }
  }
  if (count < target) {
    // Placement kept missing the last free cells; finish with random cells.
    std::vector<std::size_t> free_cells;
    for (std::size_t i = 0; i < n; ++i)
      if (!flags[i]) free_cells.push_back(i);
    rng.shuffle(free_cells);
    last_added.clear();
    for (std::size_t i = 0; count < target; ++i, ++count) {
      flags[free_cells[i]] = 1;
      last_added.push_back(free_cells[i]);
    }
  }
  while (count > target) {
    flags[last_added.back()] = 0;
    last_added.pop_back();
    --count;
  }
  return from_flags(flags);
}

MaskResult sample_mask(MaskStrategy strategy, std::size_t grid_h, std::size_t grid_w, double ratio,
                       Rng& rng) {
  return strategy == MaskStrategy::kRandom ? sample_random_mask(grid_h * grid_w, ratio, rng)
                                           : sample_block_mask(grid_h, grid_w, ratio, rng);
}

VisiblePatches apply_mask(const PatchGrid& grid, const MaskResult& mask) {
  if (mask.n_patches != grid.size()) {
    raise(ErrorKind::kDimension, kModule,
          "mask covers " + std::to_string(mask.n_patches) + " patches, grid has " +
              std::to_string(grid.size()));
  }
  VisiblePatches out;
  out.patch_dim = grid.patch_dim;
  out.indices = mask.visible;
  out.values.reserve(mask.visible.size() * grid.patch_dim);
  for (std::size_t idx : mask.visible) {
    const auto p = grid.patch(idx);
    out.values.insert(out.values.end(), p.begin(), p.end());
  }
  return out;
}

std::uint64_t eval_mask_seed(std::uint64_t run_seed, std::uint64_t split_id,
                             std::uint64_t sample_index) {
  return derive_seed(run_seed, {0x6d61736bULL, split_id, sample_index});
}

std::size_t masked_adjacency(const MaskResult& mask, std::size_t grid_h, std::size_t grid_w) {
  std::vector<char> flags(grid_h * grid_w, 0);
  for (std::size_t i : mask.masked) flags[i] = 1;
  std::size_t count = 0;
  for (std::size_t y = 0; y < grid_h; ++y)
    for (std::size_t x = 0; x < grid_w; ++x) {
      if (!flags[y * grid_w + x]) continue;
      const bool neighbour = (y > 0 && flags[(y - 1) * grid_w + x]) ||
                             (y + 1 < grid_h && flags[(y + 1) * grid_w + x]) ||
                             (x > 0 && flags[y * grid_w + x - 1]) ||
                             (x + 1 < grid_w && flags[y * grid_w + x + 1]);
      count += neighbour ? 1 : 0;
    }
  return count;
}

}  // namespace promim
