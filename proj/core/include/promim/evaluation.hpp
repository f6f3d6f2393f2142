#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promim/data.hpp"
#include "promim/encoders.hpp"
#include "promim/training.hpp"

namespace promim {

/// Maps samples to predicted class positions within `classes`.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<std::size_t> predict(const EncodedDataset& data,
                                           std::span<const std::size_t> samples,
                                           std::span<const std::size_t> classes) const = 0;
};

/// Hand-crafted "a photo of a [CLS]" prompts.
class ZeroShotClassifier final : public Classifier {
 public:
  explicit ZeroShotClassifier(const DualEncoder& encoder) : encoder_(encoder) {}
  std::vector<std::size_t> predict(const EncodedDataset& data, std::span<const std::size_t> samples,
                                   std::span<const std::size_t> classes) const override;

 private:
  const DualEncoder& encoder_;
};

/// Learned prompts. ProMIM conditions on a deterministically masked view of
/// each evaluation image when `mask_at_eval` is set, seeded by
/// (run_seed, split_id, sample id).
class PromptClassifier final : public Classifier {
 public:
  struct Options {
    bool mask_at_eval = true;
    MaskSpec mask;
    std::uint64_t run_seed = 0;
    std::uint64_t split_id = 0;
  };

  PromptClassifier(const DualEncoder& encoder, const PromptLearner& learner, Options options)
      : encoder_(encoder), learner_(learner), options_(options) {}
  std::vector<std::size_t> predict(const EncodedDataset& data, std::span<const std::size_t> samples,
                                   std::span<const std::size_t> classes) const override;

 private:
  const DualEncoder& encoder_;
  const PromptLearner& learner_;
  Options options_;
};

/// Percentage of positions where predicted == truth.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// Accuracy (percent) of `model` on `samples`, predicting among `classes` only.
double evaluate_accuracy(const Classifier& model, const EncodedDataset& data,
                         std::span<const std::size_t> samples, std::span<const std::size_t> classes);

/// 2*b*n / (b + n); both accuracies must be positive.
double harmonic_mean(double base, double novel);

/// One row of the results table. NaN fields are written as empty cells.
struct MetricRecord {
  std::string method;
  std::string family;
  std::string axis;
  std::string value;
  std::optional<std::uint64_t> seed;  // empty for aggregates
  double base = 0.0;
  double novel = 0.0;
  double h = 0.0;
  std::size_t tokens = 0;
};

std::string family_label(std::size_t family_id);

/// Datasets of a benchmark suite: `families` copies of `base` with
/// consecutive family ids.
std::vector<Dataset> generate_suite(const SyntheticDatasetSpec& base, std::size_t families);

std::vector<EncodedDataset> encode_suite(const DualEncoder& encoder, std::span<const Dataset> suite,
                                         std::size_t parallel = 1);

/// Runs fn(0..n-1) on up to `threads` workers; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

PromptClassifier::Options eval_options(const TuneConfig& cfg, std::uint64_t seed,
                                       std::uint64_t split_id);

/// Tune on the base shots of one family and score base and new classes.
/// The tuned state is moved into `tuned` when given.
MetricRecord base_to_new_cell(const DualEncoder& encoder, const Dataset& dataset,
                              const EncodedDataset& data, const TuneConfig& cfg, std::uint64_t seed,
                              TuneResult* tuned = nullptr);

/// Scores an already tuned learner on the held-out base and new sets of
/// the split `seed` selects.
MetricRecord score_base_to_new(const DualEncoder& encoder, const Dataset& dataset,
                               const EncodedDataset& data, const PromptLearner& learner,
                               const TuneConfig& cfg, std::uint64_t seed);

/// Seed-independent zero-shot scores on the same held-out sets.
MetricRecord zero_shot_cell(const DualEncoder& encoder, const Dataset& dataset,
                            const EncodedDataset& data, std::size_t shots);

struct BaseToNewReport {
  std::vector<MetricRecord> per_seed;
  std::vector<MetricRecord> per_family;  // base/new averaged over seeds, then H
  MetricRecord average;                  // base/new averaged over families, then H
  double mean_of_h = 0.0;                // mean of per-family H
};

/// Groups family-major per-seed records (`seeds` per family) into family
/// and suite aggregates.
BaseToNewReport aggregate_base_to_new(std::vector<MetricRecord> per_seed, std::size_t seeds);

/// `zero_shot` evaluates the hand-crafted prompt instead of tuning.
BaseToNewReport base_to_new(const DualEncoder& encoder, std::span<const Dataset> suite,
                            std::span<const EncodedDataset> encoded, const TuneConfig& cfg,
                            bool zero_shot = false, std::size_t parallel = 1);

struct TransferTarget {
  std::string name;
  const Dataset* dataset = nullptr;
  const EncodedDataset* encoded = nullptr;
};

struct TransferReport {
  double source = 0.0;             // held-out source accuracy, seed mean
  std::vector<MetricRecord> rows;  // one per target (base = source, novel = target)
  double target_average = 0.0;
};

/// Tunes on every class of the source and evaluates each target over its
/// own classes. Targets are not checked for overlap with the source, and
/// share the source's evaluation masks for equal sample ids.
TransferReport evaluate_transfer(const DualEncoder& encoder, const Dataset& source,
                                 const EncodedDataset& source_data,
                                 std::span<const TransferTarget> targets, const TuneConfig& cfg,
                                 std::string_view axis, std::size_t parallel = 1);

/// Transfer to other families; a target sharing any class with the source
/// is rejected.
TransferReport cross_dataset(const DualEncoder& encoder, const Dataset& source,
                             const EncodedDataset& source_data,
                             std::span<const TransferTarget> targets, const TuneConfig& cfg,
                             std::size_t parallel = 1);

/// Transfer to shifted copies of the source (same classes).
TransferReport domain_shift(const DualEncoder& encoder, const Dataset& source,
                            const EncodedDataset& source_data, std::span<const Shift> shifts,
                            const TuneConfig& cfg, std::size_t parallel = 1);

enum class SweepAxis { kMaskRatio, kLambda, kShots, kStrategy };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

/// Copy of `cfg` with the axis set to `value`; rejects values outside the
/// axis domain.
TuneConfig apply_axis(const TuneConfig& cfg, SweepAxis axis, std::string_view value);

/// Suite-average row per value.
std::vector<MetricRecord> sweep(const DualEncoder& encoder, std::span<const Dataset> suite,
                                std::span<const EncodedDataset> encoded, const TuneConfig& cfg,
                                SweepAxis axis, std::span<const std::string> values,
                                std::size_t parallel = 1);

/// The four cells of the MIM-context x knowledge-guidance grid, suite averages:
/// (off, off) CoCoOp, (off, on) KgCoOp, (on, off) ProMIM with lambda 0,
/// (on, on) ProMIM.
std::vector<MetricRecord> mim_kg_ablation(const DualEncoder& encoder, std::span<const Dataset> suite,
                                          std::span<const EncodedDataset> encoded,
                                          const TuneConfig& cfg, std::size_t parallel = 1);

std::string results_csv(std::span<const MetricRecord> rows);

}  // namespace promim
