#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promim/data.hpp"
#include "promim/encoders.hpp"
#include "promim/masking.hpp"
#include "promim/objectives.hpp"
#include "promim/prompting.hpp"

namespace promim {

enum class TuneMethod { kCoop, kCocoop, kKgcoop, kPromim };

std::string_view to_string(TuneMethod method);
TuneMethod parse_tune_method(std::string_view name);
PromptMethod prompt_method_for(TuneMethod method);

/// Prompt-tuning hyperparameters. Defaults: 10 epochs of plain SGD at
/// lr 0.02, batch size 1, M = 4 context tokens, lambda = 2, random masking
/// at ratio 0.75, 16 shots, seeds {0, 1, 2}.
struct TuneConfig {
  TuneMethod method = TuneMethod::kPromim;
  std::size_t epochs = 10;
  double lr = 0.02;
  std::size_t batch_size = 1;
  std::size_t context_length = kDefaultContextLength;
  double lambda = kDefaultKgWeight;
  MaskSpec mask{MaskStrategy::kRandom, 0.75, 0};
  std::size_t shots = 16;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t meta_reduction = kDefaultMetaReduction;
  /// Apply a deterministic per-sample mask when evaluating ProMIM prompts.
  bool eval_masking = true;
  /// Knowledge-guidance distance on L2-normalized (default) or raw
  /// text-encoder outputs.
  bool kg_normalized = true;

  void validate() const;
  /// 0 for coop/cocoop, `lambda` otherwise.
  double effective_lambda() const;
  bool conditioned() const { return method == TuneMethod::kCocoop || method == TuneMethod::kPromim; }
  bool masked() const { return method == TuneMethod::kPromim; }
};

nlohmann::json to_json(const TuneConfig& cfg);
TuneConfig tune_config_from_json(const nlohmann::json& j);

/// Trainable prompt state: context tokens plus, for conditional methods,
/// the meta-network.
struct PromptLearner {
  TuneMethod method = TuneMethod::kCoop;
  ContextTokens context;
  std::optional<MetaNet> meta;

  /// Context tokens and meta-net draw from separate streams, so every
  /// method starts from the same context vectors for a given seed.
  static PromptLearner initialize(TuneMethod method, const EncoderConfig& encoder,
                                  std::size_t context_length, std::size_t meta_reduction,
                                  std::uint64_t seed);
  std::vector<Tensor> parameters() const;
  std::uint64_t checksum() const;
};

/// Frozen-encoder features for every sample of a dataset.
struct EncodedDataset {
  std::size_t family_id = 0;
  std::vector<std::string> class_names;
  std::vector<std::size_t> labels;
  std::vector<std::uint64_t> sample_ids;
  std::vector<PatchGrid> grids;
  std::vector<std::vector<double>> features;  // full-image embeddings, not normalized
  std::uint64_t encoder_checksum = 0;

  std::size_t size() const { return labels.size(); }
  Tensor feature(std::size_t index) const { return Tensor::vector(features[index]); }
};

EncodedDataset encode_dataset(const DualEncoder& encoder, const Dataset& dataset);

/// Image embedding fed to the meta-network, plus the tokens spent on it.
struct Conditioning {
  Tensor input;
  std::size_t tokens_processed = 0;
};

/// Full-image conditioning (CoCoOp).
Conditioning full_conditioning(const DualEncoder& encoder, const EncodedDataset& data,
                               std::size_t index);
/// Conditioning on the visible patches of `mask` only (ProMIM).
Conditioning masked_conditioning(const DualEncoder& encoder, const EncodedDataset& data,
                                 std::size_t index, const MaskResult& mask);

/// L2-normalized class text embeddings [C, D] for the learner, conditioned
/// when the learner has a meta-net.
Tensor class_text_embeddings(const DualEncoder& encoder, const PromptLearner& learner,
                             const std::vector<std::string>& classes,
                             const std::optional<Tensor>& conditioning);

struct SampleForward {
  Tensor class_embeddings;
  ClassProbabilities probs;
  LossBreakdown loss;
};

/// Unnormalized text-encoder outputs of the learner's prompts, [C, D].
Tensor class_text_outputs(const DualEncoder& encoder, const PromptLearner& learner,
                          const std::vector<std::string>& classes,
                          const std::optional<Tensor>& conditioning);

/// Prediction and objective for one training sample: probabilities use the
/// full-image feature, the conditioning path may be masked. With
/// `kg_normalized = false` the reference must hold raw outputs too.
SampleForward forward_sample(const DualEncoder& encoder, const PromptLearner& learner,
                             const EncodedDataset& data, std::size_t index,
                             const std::vector<std::string>& classes, std::size_t label,
                             const ReferenceEmbeddings& reference, double lambda,
                             const std::optional<Tensor>& conditioning, bool kg_normalized = true);

/// p <- p - lr * g for every parameter, then zero the gradients. Parameters
/// without a gradient buffer are left untouched.
void sgd_step(std::span<Tensor> params, double lr);

/// Adam with bias correction; used for contrastive pretraining only.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainingLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double ce = 0.0;
  double kg = 0.0;
  double lambda = 0.0;
  double total = 0.0;
  std::size_t tokens_processed = 0;

  bool operator==(const TrainingLogRow&) const = default;
};

struct TuneResult {
  PromptLearner learner;
  std::vector<TrainingLogRow> log;
  std::size_t tokens_processed = 0;             // conditioning-path tokens, all steps
  std::vector<std::uint64_t> trained_sample_ids;  // every sample that produced a gradient
};

/// Prompt tuning on the base-class shots of `split`.
TuneResult tune(const DualEncoder& encoder, const EncodedDataset& data, const SplitPlan& split,
                const TuneConfig& cfg, std::uint64_t seed);

std::string training_log_csv(std::span<const TrainingLogRow> rows);

struct PretrainConfig {
  std::size_t steps = 1500;
  std::size_t batch_size = 32;
  double lr = 2e-3;
  std::uint64_t seed = 0;
  double max_logit_scale = 4.605170185988092;  // ln 100

  bool operator==(const PretrainConfig&) const = default;
};

struct PretrainResult {
  DualEncoder encoder;
  std::vector<double> losses;  // one per step
};

/// Seed of the initial weights `pretrain` starts from.
std::uint64_t pretrain_init_seed(std::uint64_t seed);

/// Contrastive pretraining on (image, caption) pairs drawn from `corpus`;
/// each batch holds distinct classes. The returned encoder is frozen.
PretrainResult pretrain(const EncoderConfig& config, std::span<const Dataset> corpus,
                        const PretrainConfig& cfg);

/// Zero-shot accuracy (percent) of the hand-crafted template on the given samples.
double zero_shot_accuracy(const DualEncoder& encoder, const EncodedDataset& data,
                          std::span<const std::size_t> samples,
                          std::span<const std::size_t> classes);

/// Reproducibility record of one CLI run.
struct RunManifest {
  std::string run_id;
  std::string command;
  nlohmann::json config;  // fully resolved
  std::string encoder_checksum;
  nlohmann::json datasets = nlohmann::json::array();
  nlohmann::json metrics = nlohmann::json::array();
  nlohmann::json outputs = nlohmann::json::array();
  nlohmann::json extra = nlohmann::json::object();  // command-specific series
  double wall_clock_seconds = 0.0;
  std::size_t tokens_processed = 0;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

std::string hex_checksum(std::uint64_t value);

}  // namespace promim
