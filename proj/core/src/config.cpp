#include "promim/config.hpp"

#include "promim/checkpoint.hpp"
#include "promim/error.hpp"
#include "promim/evaluation.hpp"
#include "promim/masking.hpp"

namespace promim {
namespace {

constexpr std::string_view kModule = "config";

using json = nlohmann::json;

void merge_strict(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) raise(ErrorKind::kInput, kModule, "'" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) raise(ErrorKind::kInput, kModule, "unknown key '" + where + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, where);
    } else {
      slot = value;
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    raise(ErrorKind::kInput, kModule, "bad value for '" + section + "." + key + "': " + e.what());
  }
}

std::string value_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  raise(ErrorKind::kInput, kModule, "sweep values must be numbers or strings");
}

}  // namespace

json default_config_json() {
  const EncoderConfig a;
  const PretrainConfig p;
  const SyntheticDatasetSpec d;
  const EncoderSection e;
  const DataSection ds;
  const EvalSection ev;
  const SweepSection sw;
  const OutputSection out;
  json shifts = json::array({
      {{"kind", "brightness"}, {"magnitude", 0.25}},
      {{"kind", "brightness"}, {"magnitude", -0.25}},
      {{"kind", "noise"}, {"magnitude", 0.2}},
      {{"kind", "invert"}, {"magnitude", 1.0}},
  });
  return {
      {"encoder",
       {{"image_side", a.image_side},
        {"channels", a.channels},
        {"patch_size", a.patch_size},
        {"embed_dim", a.embed_dim},
        {"depth", a.depth},
        {"heads", a.heads},
        {"mlp_ratio", a.mlp_ratio},
        {"text_vocab_size", a.text_vocab_size},
        {"max_text_len", a.max_text_len},
        {"output_dim", a.output_dim},
        {"checkpoint", e.checkpoint},
        {"pretrain",
         {{"steps", p.steps},
          {"batch_size", p.batch_size},
          {"lr", p.lr},
          {"seed", p.seed},
          {"max_logit_scale", p.max_logit_scale},
          {"families", e.pretrain_families}}}}},
      {"data",
       {{"families", ds.families},
        {"first_family", d.family_id},
        {"n_classes", d.n_classes},
        {"samples_per_class", d.samples_per_class},
        {"noise_std", d.noise_std},
        {"prototypes_seed", d.prototypes_seed},
        {"sample_seed", d.sample_seed},
        {"pretrain_sample_seed", ds.pretrain_sample_seed}}},
      {"tune", to_json(TuneConfig{})},
      {"eval",
       {{"protocol", ev.protocol},
        {"source_family", ev.source_family},
        {"target_families", ev.target_families},
        {"shifts", shifts},
        {"zero_shot_baseline", ev.zero_shot_baseline},
        {"verbose", ev.verbose},
        {"checkpoint", ev.checkpoint}}},
      {"sweep", {{"axis", sw.axis}, {"values", sw.values}}},
      {"output", {{"root", out.root}, {"run_id", out.run_id}}},
  };
}

Config config_from_json(const json& input) {
  json j = default_config_json();
  merge_strict(j, input, "");
  Config cfg;

  const json& e = j.at("encoder");
  EncoderConfig& a = cfg.encoder.architecture;
  a.image_side = get<std::size_t>(e, "image_side", "encoder");
  a.channels = get<std::size_t>(e, "channels", "encoder");
  a.patch_size = get<std::size_t>(e, "patch_size", "encoder");
  a.embed_dim = get<std::size_t>(e, "embed_dim", "encoder");
  a.depth = get<std::size_t>(e, "depth", "encoder");
  a.heads = get<std::size_t>(e, "heads", "encoder");
  a.mlp_ratio = get<std::size_t>(e, "mlp_ratio", "encoder");
  a.text_vocab_size = get<std::size_t>(e, "text_vocab_size", "encoder");
  a.max_text_len = get<std::size_t>(e, "max_text_len", "encoder");
  a.output_dim = get<std::size_t>(e, "output_dim", "encoder");
  a.validate();
  cfg.encoder.checkpoint = get<std::string>(e, "checkpoint", "encoder");
  const json& p = e.at("pretrain");
  cfg.encoder.pretrain.steps = get<std::size_t>(p, "steps", "encoder.pretrain");
  cfg.encoder.pretrain.batch_size = get<std::size_t>(p, "batch_size", "encoder.pretrain");
  cfg.encoder.pretrain.lr = get<double>(p, "lr", "encoder.pretrain");
  cfg.encoder.pretrain.seed = get<std::uint64_t>(p, "seed", "encoder.pretrain");
  cfg.encoder.pretrain.max_logit_scale = get<double>(p, "max_logit_scale", "encoder.pretrain");
  cfg.encoder.pretrain_families = get<std::size_t>(p, "families", "encoder.pretrain");
  if (cfg.encoder.pretrain.batch_size < 2 ||
      !(cfg.encoder.pretrain.lr > 0.0) || cfg.encoder.pretrain_families == 0) {
    raise(ErrorKind::kInput, kModule,
          "encoder.pretrain needs batch_size >= 2, lr > 0 and at least one family");
  }

  const json& d = j.at("data");
  cfg.data.families = get<std::size_t>(d, "families", "data");
  cfg.data.spec.family_id = get<std::size_t>(d, "first_family", "data");
  cfg.data.spec.n_classes = get<std::size_t>(d, "n_classes", "data");
  cfg.data.spec.samples_per_class = get<std::size_t>(d, "samples_per_class", "data");
  cfg.data.spec.noise_std = get<double>(d, "noise_std", "data");
  cfg.data.spec.prototypes_seed = get<std::uint64_t>(d, "prototypes_seed", "data");
  cfg.data.spec.sample_seed = get<std::uint64_t>(d, "sample_seed", "data");
  cfg.data.pretrain_sample_seed = get<std::uint64_t>(d, "pretrain_sample_seed", "data");
  cfg.data.spec.image_side = a.image_side;
  cfg.data.spec.channels = a.channels;
  if (cfg.data.families == 0) raise(ErrorKind::kInput, kModule, "data.families must be positive");
  if (cfg.data.pretrain_sample_seed == cfg.data.spec.sample_seed) {
    raise(ErrorKind::kInput, kModule, "pretraining and evaluation samples must use different seeds");
  }
  cfg.data.spec.validate();

  cfg.tune = tune_config_from_json(j.at("tune"));

  const json& ev = j.at("eval");
  cfg.eval.protocol = get<std::string>(ev, "protocol", "eval");
  if (cfg.eval.protocol != "base_to_new" && cfg.eval.protocol != "cross_dataset" &&
      cfg.eval.protocol != "domain_shift") {
    raise(ErrorKind::kInput, kModule, "unknown eval.protocol '" + cfg.eval.protocol + "'");
  }
  cfg.eval.source_family = get<std::size_t>(ev, "source_family", "eval");
  cfg.eval.target_families = get<std::vector<std::size_t>>(ev, "target_families", "eval");
  for (const json& s : ev.at("shifts")) {
    if (!s.is_object()) raise(ErrorKind::kInput, kModule, "eval.shifts entries must be objects");
    for (const auto& [key, value] : s.items()) {
      if (key != "kind" && key != "magnitude") {
        raise(ErrorKind::kInput, kModule, "unknown key '" + key + "' in eval.shifts");
      }
    }
    Shift shift;
    shift.kind = parse_shift_kind(get<std::string>(s, "kind", "eval.shifts"));
    if (s.contains("magnitude")) shift.magnitude = get<double>(s, "magnitude", "eval.shifts");
    cfg.eval.shifts.push_back(shift);
  }
  cfg.eval.zero_shot_baseline = get<bool>(ev, "zero_shot_baseline", "eval");
  cfg.eval.verbose = get<bool>(ev, "verbose", "eval");
  cfg.eval.checkpoint = get<std::string>(ev, "checkpoint", "eval");

  const json& sw = j.at("sweep");
  cfg.sweep.axis = get<std::string>(sw, "axis", "sweep");
  if (cfg.sweep.axis != "ablation") parse_sweep_axis(cfg.sweep.axis);
  if (!sw.at("values").is_array()) raise(ErrorKind::kInput, kModule, "sweep.values must be an array");
  cfg.sweep.values.clear();
  for (const json& v : sw.at("values")) cfg.sweep.values.push_back(value_string(v));

  const json& out = j.at("output");
  cfg.output.root = get<std::string>(out, "root", "output");
  cfg.output.run_id = get<std::string>(out, "run_id", "output");

  // Normalize sweep values so the resolved form is stable.
  j["sweep"]["values"] = cfg.sweep.values;
  cfg.resolved = j;
  return cfg;
}

Config load_config(const std::optional<std::filesystem::path>& path,
                   std::span<const std::string> overrides) {
  json j = json::object();
  if (path) {
    try {
      j = read_json_file(*path);
    } catch (const Error& e) {
      raise(ErrorKind::kInput, kModule, e.what());
    }
  }
  return resolve_config(std::move(j), overrides);
}

Config resolve_config(json j, std::span<const std::string> overrides) {
  const json schema = default_config_json();
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      raise(ErrorKind::kInput, kModule, "override '" + ov + "' is not key=value");
    }
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    const json* schema_node = &schema;
    json* node = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!schema_node->is_object() || !schema_node->contains(part)) {
        raise(ErrorKind::kInput, kModule, "unknown key '" + key + "'");
      }
      schema_node = &schema_node->at(part);
      if (!node->is_object()) *node = json::object();
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (schema_node->is_object()) {
      raise(ErrorKind::kInput, kModule, "override '" + key + "' names a section, not a value");
    }
    *node = value;
  }
  return config_from_json(j);
}

std::vector<Dataset> suite_datasets(const DataSection& data) {
  return generate_suite(data.spec, data.families);
}

std::vector<Dataset> pretrain_corpus(const Config& cfg) {
  DataSection corpus = cfg.data;
  corpus.spec.family_id = 0;
  corpus.spec.sample_seed = cfg.data.pretrain_sample_seed;
  corpus.families = cfg.encoder.pretrain_families;
  return suite_datasets(corpus);
}

}  // namespace promim
