#include "promim/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "promim/error.hpp"
#include "promim/objectives.hpp"
#include "promim/random.hpp"

namespace promim {
namespace {

constexpr std::string_view kModule = "evaluation";
constexpr std::uint64_t kSplitBase = 0;
constexpr std::uint64_t kSplitNew = 1;

std::vector<std::string> names_of(const EncodedDataset& data, std::span<const std::size_t> classes) {
  std::vector<std::string> out;
  for (std::size_t c : classes) {
    if (c >= data.class_names.size()) raise(ErrorKind::kInput, kModule, "class index out of range");
    out.push_back(data.class_names[c]);
  }
  return out;
}

std::vector<std::size_t> local_truth(const EncodedDataset& data, std::span<const std::size_t> samples,
                                     std::span<const std::size_t> classes) {
  std::vector<std::size_t> truth;
  truth.reserve(samples.size());
  for (std::size_t idx : samples) {
    if (idx >= data.size()) raise(ErrorKind::kInput, kModule, "sample index out of range");
    const auto it = std::find(classes.begin(), classes.end(), data.labels[idx]);
    if (it == classes.end()) {
      raise(ErrorKind::kInput, kModule,
            "sample " + std::to_string(data.sample_ids[idx]) + " is not in the evaluated classes");
    }
    truth.push_back(static_cast<std::size_t>(it - classes.begin()));
  }
  return truth;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string method_label(const TuneConfig& cfg) { return std::string(to_string(cfg.method)); }

bool parse_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string cell(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

std::vector<std::size_t> ZeroShotClassifier::predict(const EncodedDataset& data,
                                                     std::span<const std::size_t> samples,
                                                     std::span<const std::size_t> classes) const {
  NoGradGuard no_grad;
  const Tensor w = encode_prompt_set(encoder_, handcrafted_prompts(encoder_, names_of(data, classes)));
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (std::size_t idx : samples) {
    out.push_back(class_probabilities(data.feature(idx), w, encoder_.tau()).argmax());
  }
  return out;
}

std::vector<std::size_t> PromptClassifier::predict(const EncodedDataset& data,
                                                   std::span<const std::size_t> samples,
                                                   std::span<const std::size_t> classes) const {
  NoGradGuard no_grad;
  const std::vector<std::string> names = names_of(data, classes);
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  if (!learner_.meta) {
    const Tensor w = class_text_embeddings(encoder_, learner_, names, std::nullopt);
    for (std::size_t idx : samples) {
      out.push_back(class_probabilities(data.feature(idx), w, encoder_.tau()).argmax());
    }
    return out;
  }
  const std::size_t g = encoder_.config().grid_side();
  for (std::size_t idx : samples) {
    Conditioning c;
    if (learner_.method == TuneMethod::kPromim && options_.mask_at_eval) {
      Rng rng(eval_mask_seed(options_.run_seed, options_.split_id, data.sample_ids[idx]));
      c = masked_conditioning(encoder_, data, idx,
                              sample_mask(options_.mask.strategy, g, g, options_.mask.ratio, rng));
    } else {
      c = full_conditioning(encoder_, data, idx);
    }
    const Tensor w = class_text_embeddings(encoder_, learner_, names, c.input);
    out.push_back(class_probabilities(data.feature(idx), w, encoder_.tau()).argmax());
  }
  return out;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) {
    raise(ErrorKind::kDimension, kModule, "prediction and label counts differ");
  }
  if (truth.empty()) raise(ErrorKind::kInput, kModule, "empty evaluation set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
}

double evaluate_accuracy(const Classifier& model, const EncodedDataset& data,
                         std::span<const std::size_t> samples, std::span<const std::size_t> classes) {
  if (samples.empty()) raise(ErrorKind::kInput, kModule, "empty evaluation set");
  if (classes.size() < 2) raise(ErrorKind::kInput, kModule, "need at least two classes");
  const auto truth = local_truth(data, samples, classes);
  return accuracy(model.predict(data, samples, classes), truth);
}

double harmonic_mean(double base, double novel) {
  if (!(base > 0.0) || !(novel > 0.0) || !std::isfinite(base) || !std::isfinite(novel)) {
    raise(ErrorKind::kInput, kModule, "harmonic mean needs positive finite accuracies");
  }
  return 2.0 * base * novel / (base + novel);
}

std::string family_label(std::size_t family_id) { return "family" + std::to_string(family_id); }

std::vector<Dataset> generate_suite(const SyntheticDatasetSpec& base, std::size_t families) {
  if (families == 0) raise(ErrorKind::kInput, kModule, "suite needs at least one family");
  std::vector<Dataset> out;
  out.reserve(families);
  for (std::size_t f = 0; f < families; ++f) {
    SyntheticDatasetSpec spec = base;
    spec.family_id = base.family_id + f;
    out.push_back(generate_dataset(spec));
  }
  return out;
}

std::vector<EncodedDataset> encode_suite(const DualEncoder& encoder, std::span<const Dataset> suite,
                                         std::size_t parallel) {
  std::vector<EncodedDataset> out(suite.size());
  parallel_for(suite.size(), parallel, [&](std::size_t i) { out[i] = encode_dataset(encoder, suite[i]); });
  return out;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::lock_guard lock(mu);
          if (failure) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

PromptClassifier::Options eval_options(const TuneConfig& cfg, std::uint64_t seed,
                                       std::uint64_t split_id) {
  return {cfg.eval_masking, cfg.mask, seed, split_id};
}

MetricRecord score_base_to_new(const DualEncoder& encoder, const Dataset& dataset,
                               const EncodedDataset& data, const PromptLearner& learner,
                               const TuneConfig& cfg, std::uint64_t seed) {
  const SplitPlan split = make_split(dataset, cfg.shots, seed);
  MetricRecord r;
  r.method = method_label(cfg);
  r.family = family_label(dataset.spec.family_id);
  r.axis = "base_to_new";
  r.seed = seed;
  r.base = evaluate_accuracy(PromptClassifier(encoder, learner, eval_options(cfg, seed, kSplitBase)),
                             data, split.eval_base, split.base_classes);
  r.novel = evaluate_accuracy(PromptClassifier(encoder, learner, eval_options(cfg, seed, kSplitNew)),
                              data, split.eval_new, split.new_classes);
  r.h = harmonic_mean(r.base, r.novel);
  return r;
}

MetricRecord base_to_new_cell(const DualEncoder& encoder, const Dataset& dataset,
                              const EncodedDataset& data, const TuneConfig& cfg, std::uint64_t seed,
                              TuneResult* tuned) {
  const SplitPlan split = make_split(dataset, cfg.shots, seed);
  TuneResult result = tune(encoder, data, split, cfg, seed);
  MetricRecord r = score_base_to_new(encoder, dataset, data, result.learner, cfg, seed);
  r.tokens = result.tokens_processed;
  if (tuned) *tuned = std::move(result);
  return r;
}

MetricRecord zero_shot_cell(const DualEncoder& encoder, const Dataset& dataset,
                            const EncodedDataset& data, std::size_t shots) {
  const SplitPlan split = make_split(dataset, shots, 0);
  const ZeroShotClassifier model(encoder);
  MetricRecord r;
  r.method = "zeroshot";
  r.family = family_label(dataset.spec.family_id);
  r.axis = "base_to_new";
  r.base = evaluate_accuracy(model, data, split.eval_base, split.base_classes);
  r.novel = evaluate_accuracy(model, data, split.eval_new, split.new_classes);
  r.h = harmonic_mean(r.base, r.novel);
  return r;
}

BaseToNewReport base_to_new(const DualEncoder& encoder, std::span<const Dataset> suite,
                            std::span<const EncodedDataset> encoded, const TuneConfig& cfg,
                            bool zero_shot, std::size_t parallel) {
  cfg.validate();
  if (suite.empty() || suite.size() != encoded.size()) {
    raise(ErrorKind::kInput, kModule, "suite and encoded features must be non-empty and aligned");
  }
  BaseToNewReport report;
  const std::size_t seeds = zero_shot ? 1 : cfg.seeds.size();
  report.per_seed.resize(suite.size() * seeds);
  parallel_for(report.per_seed.size(), parallel, [&](std::size_t task) {
    const std::size_t f = task / seeds;
    report.per_seed[task] = zero_shot ? zero_shot_cell(encoder, suite[f], encoded[f], cfg.shots)
                                      : base_to_new_cell(encoder, suite[f], encoded[f], cfg,
                                                         cfg.seeds[task % seeds]);
  });

  return aggregate_base_to_new(std::move(report.per_seed), seeds);
}

BaseToNewReport aggregate_base_to_new(std::vector<MetricRecord> per_seed, std::size_t seeds) {
  if (seeds == 0 || per_seed.empty() || per_seed.size() % seeds != 0) {
    raise(ErrorKind::kInput, kModule, "per-seed records do not form whole families");
  }
  BaseToNewReport report;
  report.per_seed = std::move(per_seed);
  const std::size_t families = report.per_seed.size() / seeds;
  std::vector<double> fam_base, fam_new, fam_h;
  std::size_t tokens = 0;
  for (std::size_t f = 0; f < families; ++f) {
    std::vector<double> b, n;
    MetricRecord agg = report.per_seed[f * seeds];
    agg.seed.reset();
    agg.tokens = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const MetricRecord& r = report.per_seed[f * seeds + s];
      b.push_back(r.base);
      n.push_back(r.novel);
      agg.tokens += r.tokens;
    }
    agg.base = mean(b);
    agg.novel = mean(n);
    agg.h = harmonic_mean(agg.base, agg.novel);
    fam_base.push_back(agg.base);
    fam_new.push_back(agg.novel);
    fam_h.push_back(agg.h);
    tokens += agg.tokens;
    report.per_family.push_back(agg);
  }
  report.average = report.per_family.front();
  report.average.family = "average";
  report.average.base = mean(fam_base);
  report.average.novel = mean(fam_new);
  report.average.h = harmonic_mean(report.average.base, report.average.novel);
  report.average.tokens = tokens;
  report.mean_of_h = mean(fam_h);
  return report;
}


TransferReport evaluate_transfer(const DualEncoder& encoder, const Dataset& source,
                                 const EncodedDataset& source_data,
                                 std::span<const TransferTarget> targets, const TuneConfig& cfg,
                                 std::string_view axis, std::size_t parallel) {
  cfg.validate();
  if (targets.empty()) raise(ErrorKind::kInput, kModule, "no transfer targets");
  for (const auto& t : targets) {
    if (!t.dataset || !t.encoded) raise(ErrorKind::kInput, kModule, "incomplete transfer target");
  }
  const std::size_t seeds = cfg.seeds.size();
  std::vector<double> source_acc(seeds);
  std::vector<std::vector<double>> target_acc(seeds, std::vector<double>(targets.size()));
  std::vector<std::size_t> tokens(seeds);
  parallel_for(seeds, parallel, [&](std::size_t s) {
    const std::uint64_t seed = cfg.seeds[s];
    const SplitPlan split = make_full_split(source, cfg.shots, seed);
    const TuneResult tuned = tune(encoder, source_data, split, cfg, seed);
    tokens[s] = tuned.tokens_processed;
    const PromptClassifier model(encoder, tuned.learner, eval_options(cfg, seed, kSplitBase));
    source_acc[s] = evaluate_accuracy(model, source_data, split.eval_base, split.base_classes);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const SplitPlan target_split = make_full_split(*targets[t].dataset, 1, seed);
      target_acc[s][t] = evaluate_accuracy(model, *targets[t].encoded, target_split.eval_base,
                                           target_split.base_classes);
    }
  });
  TransferReport report;
  report.source = mean(source_acc);
  std::vector<double> avgs;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::vector<double> acc;
    for (std::size_t s = 0; s < seeds; ++s) acc.push_back(target_acc[s][t]);
    MetricRecord r;
    r.method = method_label(cfg);
    r.family = targets[t].name;
    r.axis = std::string(axis);
    r.value = family_label(source.spec.family_id);
    r.base = report.source;
    r.novel = mean(acc);
    r.h = std::nan("");
    for (std::size_t s = 0; s < seeds; ++s) r.tokens += tokens[s];
    avgs.push_back(r.novel);
    report.rows.push_back(r);
  }
  report.target_average = mean(avgs);
  return report;
}

TransferReport cross_dataset(const DualEncoder& encoder, const Dataset& source,
                             const EncodedDataset& source_data,
                             std::span<const TransferTarget> targets, const TuneConfig& cfg,
                             std::size_t parallel) {
  const std::set<std::string> source_classes(source.class_names.begin(), source.class_names.end());
  for (const auto& t : targets) {
    if (!t.dataset) raise(ErrorKind::kInput, kModule, "incomplete transfer target");
    if (t.dataset->spec.family_id == source.spec.family_id) {
      raise(ErrorKind::kInput, kModule, "target '" + t.name + "' is the source family");
    }
    for (const std::string& name : t.dataset->class_names) {
      if (source_classes.count(name)) {
        raise(ErrorKind::kInput, kModule,
              "target '" + t.name + "' shares class '" + name + "' with the source");
      }
    }
  }
  return evaluate_transfer(encoder, source, source_data, targets, cfg, "cross_dataset", parallel);
}

TransferReport domain_shift(const DualEncoder& encoder, const Dataset& source,
                            const EncodedDataset& source_data, std::span<const Shift> shifts,
                            const TuneConfig& cfg, std::size_t parallel) {
  if (shifts.empty()) raise(ErrorKind::kInput, kModule, "no shifts given");
  std::vector<Dataset> shifted;
  std::vector<std::string> names;
  for (const Shift& s : shifts) {
    shifted.push_back(apply_shift(source, s));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s@%g", std::string(to_string(s.kind)).c_str(), s.magnitude);
    names.push_back(buf);
  }
  const std::vector<EncodedDataset> encoded = encode_suite(encoder, shifted, parallel);
  std::vector<TransferTarget> targets;
  for (std::size_t i = 0; i < shifted.size(); ++i) targets.push_back({names[i], &shifted[i], &encoded[i]});
  return evaluate_transfer(encoder, source, source_data, targets, cfg, "domain_shift", parallel);
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kMaskRatio: return "mask_ratio";
    case SweepAxis::kLambda: return "lambda";
    case SweepAxis::kShots: return "shots";
    case SweepAxis::kStrategy: return "strategy";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "mask_ratio") return SweepAxis::kMaskRatio;
  if (name == "lambda") return SweepAxis::kLambda;
  if (name == "shots") return SweepAxis::kShots;
  if (name == "strategy") return SweepAxis::kStrategy;
  raise(ErrorKind::kInput, kModule, "unknown sweep axis '" + std::string(name) + "'");
}

TuneConfig apply_axis(const TuneConfig& cfg, SweepAxis axis, std::string_view value) {
  TuneConfig out = cfg;
  const std::string v(value);
  switch (axis) {
    case SweepAxis::kMaskRatio: {
      double r = 0.0;
      if (!parse_double(value, r) || !(r >= 0.0 && r < 1.0)) {
        raise(ErrorKind::kInput, kModule, "mask ratio must be in [0, 1), got '" + v + "'");
      }
      out.mask.ratio = r;
      break;
    }
    case SweepAxis::kLambda: {
      double l = 0.0;
      if (!parse_double(value, l) || !(l >= 0.0) || !std::isfinite(l)) {
        raise(ErrorKind::kInput, kModule, "lambda must be a non-negative number, got '" + v + "'");
      }
      out.lambda = l;
      break;
    }
    case SweepAxis::kShots: {
      std::size_t k = 0;
      if (!parse_size(value, k) || k == 0) {
        raise(ErrorKind::kInput, kModule, "shots must be a positive integer, got '" + v + "'");
      }
      out.shots = k;
      break;
    }
    case SweepAxis::kStrategy:
      out.mask.strategy = parse_mask_strategy(value);
      break;
  }
  out.validate();
  return out;
}

std::vector<MetricRecord> sweep(const DualEncoder& encoder, std::span<const Dataset> suite,
                                std::span<const EncodedDataset> encoded, const TuneConfig& cfg,
                                SweepAxis axis, std::span<const std::string> values,
                                std::size_t parallel) {
  if (values.empty()) raise(ErrorKind::kInput, kModule, "sweep needs at least one value");
  std::vector<TuneConfig> cfgs;
  for (const std::string& v : values) cfgs.push_back(apply_axis(cfg, axis, v));
  std::vector<MetricRecord> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    MetricRecord r = base_to_new(encoder, suite, encoded, cfgs[i], false, parallel).average;
    r.axis = std::string(to_string(axis));
    r.value = values[i];
    rows.push_back(r);
  }
  return rows;
}

std::vector<MetricRecord> mim_kg_ablation(const DualEncoder& encoder, std::span<const Dataset> suite,
                                          std::span<const EncodedDataset> encoded,
                                          const TuneConfig& cfg, std::size_t parallel) {
  struct CellSpec {
    const char* label;
    const char* value;
    TuneMethod method;
    bool kg;
  };
  const CellSpec cells[] = {
      {"cocoop", "mim_off_kg_off", TuneMethod::kCocoop, false},
      {"kgcoop", "mim_off_kg_on", TuneMethod::kKgcoop, true},
      {"promim_nokg", "mim_on_kg_off", TuneMethod::kPromim, false},
      {"promim", "mim_on_kg_on", TuneMethod::kPromim, true},
  };
  std::vector<MetricRecord> rows;
  for (const CellSpec& c : cells) {
    TuneConfig cell_cfg = cfg;
    cell_cfg.method = c.method;
    if (!c.kg) cell_cfg.lambda = 0.0;
    MetricRecord r = base_to_new(encoder, suite, encoded, cell_cfg, false, parallel).average;
    r.method = c.label;
    r.axis = "ablation";
    r.value = c.value;
    rows.push_back(r);
  }
  return rows;
}

std::string results_csv(std::span<const MetricRecord> rows) {
  std::ostringstream os;
  os << "method,family,axis,value,seed,base,new,h,tokens\n";
  for (const MetricRecord& r : rows) {
    os << r.method << ',' << r.family << ',' << r.axis << ',' << r.value << ','
       << (r.seed ? std::to_string(*r.seed) : std::string()) << ',' << cell(r.base) << ','
       << cell(r.novel) << ',' << cell(r.h) << ',' << r.tokens << '\n';
  }
  return os.str();
}

}  // namespace promim
