#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promim/encoders.hpp"

namespace promim {

enum class ShiftKind { kNone, kBrightness, kNoise, kInvert };

std::string_view to_string(ShiftKind kind);
ShiftKind parse_shift_kind(std::string_view name);

struct Shift {
  ShiftKind kind = ShiftKind::kNone;
  double magnitude = 0.0;

  bool operator==(const Shift&) const = default;
};

/// Procedural dataset family. Each family owns a disjoint slice of the class
/// vocabulary and its own prototype images.
struct SyntheticDatasetSpec {
  std::size_t n_classes = 8;
  std::uint64_t prototypes_seed = 7;
  std::uint64_t sample_seed = 11;
  std::size_t samples_per_class = 64;
  double noise_std = 0.8;
  std::size_t family_id = 0;
  std::size_t image_side = 16;
  std::size_t channels = 1;
  Shift shift;

  void validate() const;
  bool operator==(const SyntheticDatasetSpec&) const = default;
};

struct Sample {
  Image image;
  std::size_t label = 0;  // index into Dataset::class_names
  std::string class_name;
  std::size_t index_in_class = 0;
  std::uint64_t id = 0;   // unique across families: (family, class, index)
};

struct Dataset {
  SyntheticDatasetSpec spec;
  std::vector<std::string> class_names;
  std::vector<Image> prototypes;
  std::vector<Sample> samples;  // class-major: class c occupies [c*spc, (c+1)*spc)

  std::size_t num_classes() const { return class_names.size(); }
  std::uint64_t pixel_checksum() const;
};

/// Class names of a family: the family_id-th run of n_classes nouns.
std::vector<std::string> family_class_names(std::size_t family_id, std::size_t n_classes);

Image make_prototype(const SyntheticDatasetSpec& spec, std::size_t class_index);
Dataset generate_dataset(const SyntheticDatasetSpec& spec);

Dataset apply_shift(const Dataset& dataset, const Shift& shift);

/// Base/new partition plus K-shot training indices and held-out eval sets.
/// Indices refer to Dataset::samples.
struct SplitPlan {
  std::vector<std::size_t> base_classes;
  std::vector<std::size_t> new_classes;
  std::size_t shots = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval_base;
  std::vector<std::size_t> eval_new;
};

/// Samples of each class are split once (seeded by the dataset) into a
/// training pool (first half) and an evaluation half; `split_seed` only
/// picks which K pool samples are used for training. The class partition
/// is a dataset-seeded permutation: first half base, second half new.
SplitPlan make_split(const Dataset& dataset, std::size_t shots, std::uint64_t split_seed);

/// Every class treated as base (cross-dataset and domain-shift sources).
SplitPlan make_full_split(const Dataset& dataset, std::size_t shots, std::uint64_t split_seed);

std::size_t training_pool_size(const Dataset& dataset);

nlohmann::json dataset_manifest(const Dataset& dataset);
nlohmann::json to_json(const SyntheticDatasetSpec& spec);
SyntheticDatasetSpec spec_from_json(const nlohmann::json& j);

/// Writes pixels as little-endian float64 (sample-major) plus labels as
/// uint32, alongside manifest.json.
void export_raw(const Dataset& dataset, const std::filesystem::path& directory);

}  // namespace promim
