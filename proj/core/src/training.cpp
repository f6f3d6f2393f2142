#include "promim/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "promim/error.hpp"
#include "promim/random.hpp"

namespace promim {
namespace {

constexpr std::string_view kModule = "training";

// Stream tags for derive_seed.
constexpr std::uint64_t kContextTag = 0x11;
constexpr std::uint64_t kMetaTag = 0x12;
constexpr std::uint64_t kShuffleTag = 0x13;
constexpr std::uint64_t kMaskTag = 0x14;
constexpr std::uint64_t kPretrainInitTag = 0x21;
constexpr std::uint64_t kPretrainBatchTag = 0x22;

constexpr std::size_t kEncodeChunk = 64;

void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!j.is_object()) raise(ErrorKind::kInput, kModule, std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      raise(ErrorKind::kInput, kModule, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kInput, kModule, std::string("bad value for '") + key + "': " + e.what());
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<std::string> names_of(const EncodedDataset& data, std::span<const std::size_t> classes) {
  std::vector<std::string> out;
  out.reserve(classes.size());
  for (std::size_t c : classes) {
    if (c >= data.class_names.size()) raise(ErrorKind::kInput, kModule, "class index out of range");
    out.push_back(data.class_names[c]);
  }
  return out;
}

std::vector<std::size_t> all_patches(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

std::string_view to_string(TuneMethod method) {
  switch (method) {
    case TuneMethod::kCoop: return "coop";
    case TuneMethod::kCocoop: return "cocoop";
    case TuneMethod::kKgcoop: return "kgcoop";
    case TuneMethod::kPromim: return "promim";
  }
  return "unknown";
}

TuneMethod parse_tune_method(std::string_view name) {
  if (name == "coop") return TuneMethod::kCoop;
  if (name == "cocoop") return TuneMethod::kCocoop;
  if (name == "kgcoop") return TuneMethod::kKgcoop;
  if (name == "promim") return TuneMethod::kPromim;
  raise(ErrorKind::kInput, kModule, "unknown tuning method '" + std::string(name) + "'");
}

PromptMethod prompt_method_for(TuneMethod method) {
  switch (method) {
    case TuneMethod::kCoop:
    case TuneMethod::kKgcoop: return PromptMethod::kCoop;
    case TuneMethod::kCocoop: return PromptMethod::kCocoop;
    case TuneMethod::kPromim: return PromptMethod::kPromim;
  }
  return PromptMethod::kCoop;
}

void TuneConfig::validate() const {
  auto fail = [](const std::string& msg) { raise(ErrorKind::kInput, kModule, msg); };
  if (epochs == 0) fail("epochs must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("learning rate must be non-negative and finite");
  if (batch_size == 0) fail("batch_size must be positive");
  if (context_length == 0) fail("context_length must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be non-negative and finite");
  if (shots == 0) fail("shots must be positive");
  if (seeds.empty()) fail("at least one seed is required");
  if (meta_reduction == 0) fail("meta_reduction must be positive");
  mask.validate();
}

double TuneConfig::effective_lambda() const {
  return (method == TuneMethod::kCoop || method == TuneMethod::kCocoop) ? 0.0 : lambda;
}

nlohmann::json to_json(const TuneConfig& cfg) {
  return {
      {"method", std::string(to_string(cfg.method))},
      {"epochs", cfg.epochs},
      {"lr", cfg.lr},
      {"batch_size", cfg.batch_size},
      {"context_length", cfg.context_length},
      {"lambda", cfg.lambda},
      {"mask",
       {{"strategy", std::string(to_string(cfg.mask.strategy))},
        {"ratio", cfg.mask.ratio},
        {"seed", cfg.mask.seed}}},
      {"shots", cfg.shots},
      {"seeds", cfg.seeds},
      {"meta_reduction", cfg.meta_reduction},
      {"eval_masking", cfg.eval_masking},
      {"kg_normalized", cfg.kg_normalized},
  };
}

TuneConfig tune_config_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"method", "epochs", "lr", "batch_size", "context_length", "lambda", "mask", "shots",
              "seeds", "meta_reduction", "eval_masking", "kg_normalized"},
             "tune");
  TuneConfig cfg;
  std::string method(to_string(cfg.method));
  read_if(j, "method", method);
  cfg.method = parse_tune_method(method);
  read_if(j, "epochs", cfg.epochs);
  read_if(j, "lr", cfg.lr);
  read_if(j, "batch_size", cfg.batch_size);
  read_if(j, "context_length", cfg.context_length);
  read_if(j, "lambda", cfg.lambda);
  read_if(j, "shots", cfg.shots);
  read_if(j, "seeds", cfg.seeds);
  read_if(j, "meta_reduction", cfg.meta_reduction);
  read_if(j, "eval_masking", cfg.eval_masking);
  read_if(j, "kg_normalized", cfg.kg_normalized);
  if (j.contains("mask")) {
    const auto& m = j.at("mask");
    check_keys(m, {"strategy", "ratio", "seed"}, "tune.mask");
    std::string strategy(to_string(cfg.mask.strategy));
    read_if(m, "strategy", strategy);
    cfg.mask.strategy = parse_mask_strategy(strategy);
    read_if(m, "ratio", cfg.mask.ratio);
    read_if(m, "seed", cfg.mask.seed);
  }
  cfg.validate();
  return cfg;
}

PromptLearner PromptLearner::initialize(TuneMethod method, const EncoderConfig& encoder,
                                        std::size_t context_length, std::size_t meta_reduction,
                                        std::uint64_t seed) {
  if (context_length + 2 > encoder.max_text_len) {
    raise(ErrorKind::kInput, kModule,
          "context_length " + std::to_string(context_length) + " leaves no room for class tokens");
  }
  PromptLearner learner;
  learner.method = method;
  Rng ctx_rng(derive_seed(seed, {kContextTag}));
  learner.context = ContextTokens::gaussian(context_length, encoder.embed_dim, ctx_rng);
  if (method == TuneMethod::kCocoop || method == TuneMethod::kPromim) {
    Rng meta_rng(derive_seed(seed, {kMetaTag}));
    learner.meta = MetaNet::initialize(encoder.output_dim, encoder.embed_dim, meta_rng, meta_reduction);
  }
  return learner;
}

std::vector<Tensor> PromptLearner::parameters() const {
  std::vector<Tensor> out{context.vectors};
  if (meta) {
    for (const Tensor& t : meta->parameters()) out.push_back(t);
  }
  return out;
}

std::uint64_t PromptLearner::checksum() const {
  std::uint64_t h = promim::checksum(context.vectors.data());
  if (meta) {
    for (const Tensor& t : meta->parameters()) h = promim::checksum(t.data(), h);
  }
  return h;
}

EncodedDataset encode_dataset(const DualEncoder& encoder, const Dataset& dataset) {
  const EncoderConfig& cfg = encoder.config();
  if (dataset.spec.image_side != cfg.image_side || dataset.spec.channels != cfg.channels) {
    raise(ErrorKind::kDimension, kModule, "dataset image shape does not match the encoder");
  }
  EncodedDataset out;
  out.family_id = dataset.spec.family_id;
  out.class_names = dataset.class_names;
  out.encoder_checksum = encoder.checksum();
  const std::size_t n = dataset.samples.size();
  out.labels.reserve(n);
  out.sample_ids.reserve(n);
  out.grids.reserve(n);
  for (const Sample& s : dataset.samples) {
    out.labels.push_back(s.label);
    out.sample_ids.push_back(s.id);
    out.grids.push_back(patchify(s.image, cfg.patch_size));
  }
  out.features.resize(n);
  NoGradGuard no_grad;
  for (std::size_t start = 0; start < n; start += kEncodeChunk) {
    const std::size_t count = std::min(kEncodeChunk, n - start);
    std::vector<std::vector<std::size_t>> visible(count, all_patches(cfg.n_patches()));
    const auto enc = vision_encode_batch(
        encoder, std::span<const PatchGrid>(out.grids).subspan(start, count), visible);
    const std::size_t D = cfg.output_dim;
    const auto values = enc.embeddings.data();
    for (std::size_t i = 0; i < count; ++i) {
      out.features[start + i].assign(values.begin() + i * D, values.begin() + (i + 1) * D);
    }
  }
  return out;
}

Conditioning full_conditioning(const DualEncoder& encoder, const EncodedDataset& data,
                               std::size_t index) {
  return {data.feature(index), encoder.config().n_patches() + 1};
}

Conditioning masked_conditioning(const DualEncoder& encoder, const EncodedDataset& data,
                                 std::size_t index, const MaskResult& mask) {
  if (mask.n_patches != encoder.config().n_patches()) {
    raise(ErrorKind::kDimension, kModule, "mask does not match the patch grid");
  }
  if (mask.masked.empty()) return full_conditioning(encoder, data, index);
  NoGradGuard no_grad;
  const auto enc = vision_encode(encoder, data.grids[index], mask.visible);
  return {enc.embedding, enc.tokens_processed};
}

Tensor class_text_outputs(const DualEncoder& encoder, const PromptLearner& learner,
                          const std::vector<std::string>& classes,
                          const std::optional<Tensor>& conditioning) {
  std::optional<Tensor> meta_token;
  if (learner.meta) {
    if (!conditioning) {
      raise(ErrorKind::kContract, kModule, "conditional prompts need an image embedding");
    }
    meta_token = meta_forward(*learner.meta, l2_normalize(*conditioning));
  }
  const PromptSet prompts = assemble_prompts(encoder, learner.context, meta_token, classes,
                                             prompt_method_for(learner.method));
  if (prompts.class_tokens.empty()) raise(ErrorKind::kInput, kModule, "empty class list");
  return text_encode_soft_batch(encoder, prompts.prefix, prompts.class_tokens);
}

Tensor class_text_embeddings(const DualEncoder& encoder, const PromptLearner& learner,
                             const std::vector<std::string>& classes,
                             const std::optional<Tensor>& conditioning) {
  return l2_normalize(class_text_outputs(encoder, learner, classes, conditioning));
}

SampleForward forward_sample(const DualEncoder& encoder, const PromptLearner& learner,
                             const EncodedDataset& data, std::size_t index,
                             const std::vector<std::string>& classes, std::size_t label,
                             const ReferenceEmbeddings& reference, double lambda,
                             const std::optional<Tensor>& conditioning, bool kg_normalized) {
  SampleForward out;
  const Tensor raw = class_text_outputs(encoder, learner, classes, conditioning);
  out.class_embeddings = l2_normalize(raw);
  out.probs = class_probabilities(data.feature(index), out.class_embeddings, encoder.tau());
  const Tensor ce = cross_entropy(out.probs, label);
  const Tensor kg = kg_loss(kg_normalized ? out.class_embeddings : raw, reference.embeddings);
  out.loss = total_loss(ce, kg, lambda);
  return out;
}

void sgd_step(std::span<Tensor> params, double lr) {
  for (const Tensor& p : params) {
    if (p.has_grad() && !all_finite(p.grad())) {
      raise(ErrorKind::kTraining, kModule, "non-finite gradient");
    }
  }
  for (Tensor& p : params) {
    if (!p.has_grad()) continue;
    auto value = p.mutable_data();
    const auto g = p.grad();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * g[i];
    p.zero_grad();
    if (!all_finite(p.data())) {
      raise(ErrorKind::kTraining, kModule, "update produced a non-finite parameter");
    }
  }
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamOptimizer::step() {
  for (const Tensor& p : params_) {
    if (p.has_grad() && !all_finite(p.grad())) {
      raise(ErrorKind::kTraining, kModule, "non-finite gradient");
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    if (!p.has_grad()) continue;
    auto value = p.mutable_data();
    const auto g = p.grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
      value[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
    }
    p.zero_grad();
  }
}

TuneResult tune(const DualEncoder& encoder, const EncodedDataset& data, const SplitPlan& split,
                const TuneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (!encoder.frozen()) raise(ErrorKind::kContract, kModule, "tuning requires a frozen encoder");
  if (data.encoder_checksum != encoder.checksum()) {
    raise(ErrorKind::kContract, kModule, "dataset features were computed by a different encoder");
  }
  if (split.train.empty()) raise(ErrorKind::kInput, kModule, "no training samples");
  if (split.base_classes.size() < 2) raise(ErrorKind::kInput, kModule, "need at least two base classes");

  const std::vector<std::string> classes = names_of(data, split.base_classes);
  std::vector<std::ptrdiff_t> local(data.class_names.size(), -1);
  for (std::size_t i = 0; i < split.base_classes.size(); ++i) {
    local[split.base_classes[i]] = static_cast<std::ptrdiff_t>(i);
  }
  for (std::size_t idx : split.train) {
    if (idx >= data.size()) raise(ErrorKind::kInput, kModule, "training index out of range");
    if (local[data.labels[idx]] < 0) {
      raise(ErrorKind::kContract, kModule,
            "training sample " + std::to_string(data.sample_ids[idx]) + " is not a base class");
    }
  }

  const std::uint64_t encoder_before = encoder.checksum();
  const ReferenceEmbeddings reference =
      compute_reference_embeddings(encoder, classes, cfg.kg_normalized);
  const double lambda = cfg.effective_lambda();
  const std::size_t gh = encoder.config().grid_side();

  TuneResult result;
  result.learner = PromptLearner::initialize(cfg.method, encoder.config(), cfg.context_length,
                                             cfg.meta_reduction, seed);
  std::vector<Tensor> params = result.learner.parameters();
  Rng shuffle_rng(derive_seed(seed, {kShuffleTag}));
  Rng mask_rng(derive_seed(seed, {kMaskTag, cfg.mask.seed}));

  std::size_t step = 0;
  std::vector<std::size_t> order = split.train;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      TrainingLogRow row;
      row.epoch = epoch;
      row.step = step;
      row.lambda = lambda;
      try {
        Tensor loss;
        const double inv = 1.0 / static_cast<double>(end - start);
        for (std::size_t k = start; k < end; ++k) {
          const std::size_t idx = order[k];
          std::optional<Tensor> cond;
          if (cfg.method == TuneMethod::kCocoop) {
            Conditioning c = full_conditioning(encoder, data, idx);
            cond = c.input;
            row.tokens_processed += c.tokens_processed;
          } else if (cfg.method == TuneMethod::kPromim) {
            const MaskResult mask = sample_mask(cfg.mask.strategy, gh, gh, cfg.mask.ratio, mask_rng);
            Conditioning c = masked_conditioning(encoder, data, idx, mask);
            cond = c.input;
            row.tokens_processed += c.tokens_processed;
          }
          const SampleForward fwd =
              forward_sample(encoder, result.learner, data, idx, classes,
                             static_cast<std::size_t>(local[data.labels[idx]]), reference, lambda, cond,
                             cfg.kg_normalized);
          row.ce += fwd.loss.ce * inv;
          row.kg += fwd.loss.kg * inv;
          row.total += fwd.loss.total_value * inv;
          if (end - start == 1) {
            loss = fwd.loss.total;
          } else {
            const Tensor scaled = scale(fwd.loss.total, inv);
            loss = loss.defined() ? add(loss, scaled) : scaled;
          }
          result.trained_sample_ids.push_back(data.sample_ids[idx]);
        }
        loss.backward();
        sgd_step(params, cfg.lr);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric && e.kind() != ErrorKind::kTraining) throw;
        raise(ErrorKind::kTraining, kModule,
              "diverged at step " + std::to_string(step) + ": " + e.what());
      }
      result.tokens_processed += row.tokens_processed;
      result.log.push_back(row);
      ++step;
    }
  }
  if (encoder.checksum() != encoder_before) {
    raise(ErrorKind::kContract, kModule, "encoder parameters changed during tuning");
  }
  return result;
}

std::string training_log_csv(std::span<const TrainingLogRow> rows) {
  std::ostringstream os;
  os << "epoch,step,ce,kg,lambda,total,tokens_processed\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.10g,%.10g,%.10g,%.10g,%zu\n", r.epoch, r.step, r.ce,
                  r.kg, r.lambda, r.total, r.tokens_processed);
    os << buf;
  }
  return os.str();
}

std::uint64_t pretrain_init_seed(std::uint64_t seed) { return derive_seed(seed, {kPretrainInitTag}); }

PretrainResult pretrain(const EncoderConfig& config, std::span<const Dataset> corpus,
                        const PretrainConfig& cfg) {
  config.validate();
  if (corpus.empty()) raise(ErrorKind::kInput, kModule, "empty pretraining corpus");
  if (cfg.batch_size < 2) raise(ErrorKind::kInput, kModule, "pretraining needs batch_size >= 2");
  if (!(cfg.lr > 0.0)) raise(ErrorKind::kInput, kModule, "pretraining lr must be positive");

  struct ClassRef {
    std::size_t dataset;
    std::size_t cls;
  };
  std::vector<ClassRef> pool;
  std::vector<std::vector<std::vector<std::size_t>>> members(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const Dataset& ds = corpus[d];
    if (ds.spec.image_side != config.image_side || ds.spec.channels != config.channels) {
      raise(ErrorKind::kDimension, kModule, "corpus image shape does not match the encoder");
    }
    members[d].resize(ds.num_classes());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) members[d][ds.samples[i].label].push_back(i);
    for (std::size_t c = 0; c < ds.num_classes(); ++c) {
      if (!members[d][c].empty()) pool.push_back({d, c});
    }
  }
  if (pool.size() < 2) raise(ErrorKind::kInput, kModule, "pretraining needs at least two classes");

  PretrainResult result{DualEncoder::initialize(config, pretrain_init_seed(cfg.seed)), {}};
  std::vector<Tensor> params;
  for (const NamedTensor& p : result.encoder.parameters()) params.push_back(p.tensor);
  AdamOptimizer adam(params, cfg.lr);
  Rng rng(derive_seed(cfg.seed, {kPretrainBatchTag}));
  const auto templates = caption_templates();
  const std::size_t batch = std::min(cfg.batch_size, pool.size());
  const std::vector<std::size_t> visible_all = all_patches(config.n_patches());
  result.losses.reserve(cfg.steps);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t i = 0; i < batch; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    }
    std::vector<PatchGrid> grids;
    std::vector<std::vector<TokenId>> captions;
    for (std::size_t i = 0; i < batch; ++i) {
      const Dataset& ds = corpus[pool[i].dataset];
      const auto& m = members[pool[i].dataset][pool[i].cls];
      const Sample& s = ds.samples[m[rng.below(m.size())]];
      grids.push_back(patchify(s.image, config.patch_size));
      captions.push_back(fill_template(result.encoder.vocabulary(),
                                       templates[rng.below(templates.size())], s.class_name));
    }
    try {
      const std::vector<std::vector<std::size_t>> visible(batch, visible_all);
      const auto img = vision_encode_batch(result.encoder, grids, visible);
      const Tensor txt = text_encode_batch(result.encoder, captions);
      const Tensor loss = contrastive_pretrain_loss(l2_normalize(img.embeddings), l2_normalize(txt),
                                                    exp(result.encoder.logit_scale()));
      result.losses.push_back(loss.item());
      loss.backward();
      adam.step();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric && e.kind() != ErrorKind::kTraining) throw;
      raise(ErrorKind::kTraining, kModule,
            "pretraining diverged at step " + std::to_string(step) + ": " + e.what());
    }
    Tensor scale_param = result.encoder.logit_scale();
    auto s = scale_param.mutable_data();
    s[0] = std::clamp(s[0], 0.0, cfg.max_logit_scale);
  }
  result.encoder.freeze();
  return result;
}

double zero_shot_accuracy(const DualEncoder& encoder, const EncodedDataset& data,
                          std::span<const std::size_t> samples,
                          std::span<const std::size_t> classes) {
  if (samples.empty()) raise(ErrorKind::kInput, kModule, "empty evaluation set");
  const std::vector<std::string> names = names_of(data, classes);
  NoGradGuard no_grad;
  const Tensor w = encode_prompt_set(encoder, handcrafted_prompts(encoder, names));
  std::size_t correct = 0;
  for (std::size_t idx : samples) {
    const auto probs = class_probabilities(data.feature(idx), w, encoder.tau());
    const std::size_t pred = probs.argmax();
    if (classes[pred] == data.labels[idx]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::string hex_checksum(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

nlohmann::json to_json(const RunManifest& m) {
  return {
      {"run_id", m.run_id},
      {"command", m.command},
      {"config", m.config},
      {"encoder_checksum", m.encoder_checksum},
      {"datasets", m.datasets},
      {"metrics", m.metrics},
      {"outputs", m.outputs},
      {"extra", m.extra},
      {"wall_clock_seconds", m.wall_clock_seconds},
      {"tokens_processed", m.tokens_processed},
  };
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.encoder_checksum = j.value("encoder_checksum", std::string());
    m.datasets = j.value("datasets", nlohmann::json::array());
    m.metrics = j.value("metrics", nlohmann::json::array());
    m.outputs = j.value("outputs", nlohmann::json::array());
    m.extra = j.value("extra", nlohmann::json::object());
    m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    m.tokens_processed = j.value("tokens_processed", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kInput, kModule, std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

}  // namespace promim
