#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promim/data.hpp"
#include "promim/encoders.hpp"
#include "promim/training.hpp"

namespace promim {

struct EncoderSection {
  EncoderConfig architecture;
  /// Existing encoder checkpoint; empty means pretrain (or reuse the cache).
  std::string checkpoint;
  PretrainConfig pretrain;
  /// Families in the pretraining corpus; their samples use `data.pretrain_sample_seed`.
  std::size_t pretrain_families = 7;
};

struct DataSection {
  std::size_t families = 6;
  SyntheticDatasetSpec spec;  // family_id is the first family of the suite
  std::uint64_t pretrain_sample_seed = 101;
};

struct EvalSection {
  std::string protocol = "base_to_new";  // base_to_new | cross_dataset | domain_shift
  std::size_t source_family = 0;
  std::vector<std::size_t> target_families{1, 2, 3, 4, 5};
  std::vector<Shift> shifts;
  bool zero_shot_baseline = true;
  bool verbose = false;
  /// Prompt checkpoint to score instead of tuning.
  std::string checkpoint;
};

struct SweepSection {
  std::string axis = "lambda";  // mask_ratio | lambda | shots | strategy | ablation
  std::vector<std::string> values{"0", "1", "2", "4", "6", "8", "10"};
};

struct OutputSection {
  std::string root = "runs";
  std::string run_id;  // empty: derived from the command and resolved config
};

struct Config {
  EncoderSection encoder;
  DataSection data;
  TuneConfig tune;
  EvalSection eval;
  SweepSection sweep;
  OutputSection output;

  /// Fully resolved form (defaults applied), as recorded in manifests.
  nlohmann::json resolved;
};

/// Every key with its default value; also serves as the schema.
nlohmann::json default_config_json();

/// Strict parse of a resolved or partial config; unknown keys are rejected.
Config config_from_json(const nlohmann::json& j);

/// Defaults < file < overrides. Each override is "dotted.key=value", where
/// value is parsed as JSON and otherwise taken as a string.
Config load_config(const std::optional<std::filesystem::path>& path,
                   std::span<const std::string> overrides);

/// Applies overrides on top of `base` (a partial or resolved config).
Config resolve_config(nlohmann::json base, std::span<const std::string> overrides);

/// Suite datasets described by the data section.
std::vector<Dataset> suite_datasets(const DataSection& data);
/// Pretraining corpus: same generator, separate sample seed.
std::vector<Dataset> pretrain_corpus(const Config& cfg);

}  // namespace promim
