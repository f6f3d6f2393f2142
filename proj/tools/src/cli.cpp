#include "promim/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "promim/checkpoint.hpp"
#include "promim/config.hpp"
#include "promim/error.hpp"
#include "promim/evaluation.hpp"
#include "promim/report.hpp"

namespace promim::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kModule = "cli";
constexpr std::size_t kLossPlotPoints = 40;

struct Options {
  std::string command;
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  std::optional<fs::path> from_manifest;
  std::size_t parallel = 1;
  std::string checkpoint;
  std::vector<std::string> runs;
  bool quiet = false;
};

/// Configuration problems map to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string short_hash(const json& j) { return hex_checksum(fnv1a(j.dump())).substr(0, 8); }

class Run {
 public:
  Run(const Config& cfg, std::string command, std::ostream& log, bool quiet)
      : cfg_(cfg), log_(log), quiet_(quiet), start_(std::chrono::steady_clock::now()) {
    root_ = cfg.output.root;
    json identity = cfg.resolved;
    identity.erase("output");
    std::string id = cfg.output.run_id.empty() ? command + "-" + short_hash(identity) : cfg.output.run_id;
    std::string candidate = id;
    for (int n = 2; fs::exists(root_ / candidate); ++n) candidate = id + "-" + std::to_string(n);
    manifest_.run_id = candidate;
    manifest_.command = std::move(command);
    manifest_.config = cfg.resolved;
    staging_ = root_ / (".staging-" + candidate);
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }

  ~Run() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  RunManifest& manifest() { return manifest_; }
  const Config& config() const { return cfg_; }

  void info(const std::string& msg) const {
    if (!quiet_) log_ << "promim: " << msg << '\n';
  }

  void emit(const std::string& rel, const std::string& text) {
    write_text_file(staging_ / rel, text);
    manifest_.outputs.push_back(rel);
  }

  void emit_json(const std::string& rel, const json& j) { emit(rel, j.dump(2) + "\n"); }

  void add_metrics(const std::vector<MetricRecord>& rows) {
    for (const MetricRecord& r : rows) {
      manifest_.metrics.push_back(to_json(r));
      manifest_.tokens_processed += r.seed ? r.tokens : 0;
    }
  }

  fs::path commit() {
    for (const auto& [rel, text] : render_outputs(manifest_)) {
      write_text_file(staging_ / rel, text);
      manifest_.outputs.push_back(rel);
    }
    manifest_.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json_file(staging_ / "manifest.json", to_json(manifest_));
    const fs::path final_dir = root_ / manifest_.run_id;
    fs::rename(staging_, final_dir);
    committed_ = true;
    return final_dir;
  }

 private:
  const Config& cfg_;
  std::ostream& log_;
  bool quiet_;
  std::chrono::steady_clock::time_point start_;
  fs::path root_, staging_;
  RunManifest manifest_;
  bool committed_ = false;
};

json pretrain_identity(const Config& cfg) {
  json id = cfg.resolved.at("encoder");
  id.erase("checkpoint");
  const json& d = cfg.resolved.at("data");
  id["corpus"] = {{"n_classes", d.at("n_classes")},
                  {"samples_per_class", d.at("samples_per_class")},
                  {"noise_std", d.at("noise_std")},
                  {"prototypes_seed", d.at("prototypes_seed")},
                  {"pretrain_sample_seed", d.at("pretrain_sample_seed")}};
  return id;
}

struct Pretrained {
  DualEncoder encoder;
  std::vector<double> losses;
};

Pretrained run_pretraining(const Config& cfg, const Run& run) {
  run.info("pretraining encoder for " + std::to_string(cfg.encoder.pretrain.steps) + " steps");
  const std::vector<Dataset> corpus = pretrain_corpus(cfg);
  PretrainResult r = pretrain(cfg.encoder.architecture, corpus, cfg.encoder.pretrain);
  return {r.encoder, std::move(r.losses)};
}

/// Loads the configured checkpoint, else the cached encoder for this
/// pretraining setup, else pretrains and fills the cache.
DualEncoder acquire_encoder(const Config& cfg, const Run& run) {
  if (!cfg.encoder.checkpoint.empty()) {
    DualEncoder enc = load_encoder(cfg.encoder.checkpoint);
    if (!(enc.config() == cfg.encoder.architecture)) {
      raise(ErrorKind::kInput, kModule,
            "encoder checkpoint architecture differs from the encoder section");
    }
    return enc;
  }
  const fs::path cache = fs::path(cfg.output.root) / ".cache" /
                         ("encoder-" + short_hash(pretrain_identity(cfg)) + ".json");
  if (fs::exists(cache)) {
    run.info("using cached encoder " + cache.string());
    return load_encoder(cache);
  }
  Pretrained p = run_pretraining(cfg, run);
  const fs::path tmp = cache.string() + ".tmp";
  save_encoder(p.encoder, tmp);
  fs::rename(tmp, cache);
  return p.encoder;
}

void record_datasets(Run& run, std::span<const Dataset> datasets) {
  for (const Dataset& d : datasets) run.manifest().datasets.push_back(dataset_manifest(d));
}

std::vector<MetricRecord> b2n_rows(const BaseToNewReport& r, bool verbose) {
  std::vector<MetricRecord> rows = r.per_seed;
  rows.insert(rows.end(), r.per_family.begin(), r.per_family.end());
  rows.push_back(r.average);
  if (verbose) {
    MetricRecord m = r.average;
    m.axis = "base_to_new_mean_h";
    m.base = std::nan("");
    m.novel = std::nan("");
    m.h = r.mean_of_h;
    rows.push_back(m);
  }
  return rows;
}

std::vector<MetricRecord> zero_shot_rows(const DualEncoder& enc, std::span<const Dataset> suite,
                                         std::span<const EncodedDataset> encoded, const Config& cfg) {
  const BaseToNewReport zs = base_to_new(enc, suite, encoded, cfg.tune, true);
  std::vector<MetricRecord> rows = zs.per_family;
  rows.push_back(zs.average);
  return rows;
}

std::string cell_name(std::size_t family, std::uint64_t seed) {
  return family_label(family) + "-seed" + std::to_string(seed);
}

void summarize(std::ostream& out, const std::vector<MetricRecord>& rows) {
  for (const MetricRecord& r : rows) {
    if (r.seed) continue;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %-16s %-14s %-10s base %7.2f  new %7.2f  h %7.2f\n",
                  r.method.c_str(), r.family.c_str(), r.axis.c_str(), r.value.c_str(), r.base,
                  r.novel, r.h);
    out << buf;
  }
}

// ---- commands ----------------------------------------------------------------

void cmd_pretrain(Run& run) {
  const Config& cfg = run.config();
  Pretrained p = run_pretraining(cfg, run);
  run.emit_json("checkpoints/encoder.json", encoder_to_json(p.encoder));
  run.manifest().encoder_checksum = hex_checksum(p.encoder.checksum());

  std::string loss_csv = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < p.losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, p.losses[i]);
    loss_csv += buf;
  }
  run.emit("pretrain_loss.csv", loss_csv);
  json curve = json::array();
  const std::size_t stride = std::max<std::size_t>(1, p.losses.size() / kLossPlotPoints);
  for (std::size_t i = 0; i < p.losses.size(); i += stride) curve.push_back({i, p.losses[i]});
  run.manifest().extra["pretrain_loss"] = curve;
  run.manifest().extra["tau"] = p.encoder.tau();

  const std::vector<Dataset> suite = suite_datasets(cfg.data);
  const std::vector<EncodedDataset> encoded = encode_suite(p.encoder, suite);
  record_datasets(run, suite);
  run.add_metrics(zero_shot_rows(p.encoder, suite, encoded, cfg));
}

void cmd_tune(Run& run, std::size_t parallel) {
  const Config& cfg = run.config();
  const DualEncoder enc = acquire_encoder(cfg, run);
  run.manifest().encoder_checksum = hex_checksum(enc.checksum());
  const std::vector<Dataset> suite = suite_datasets(cfg.data);
  const std::vector<EncodedDataset> encoded = encode_suite(enc, suite, parallel);
  record_datasets(run, suite);

  const std::size_t seeds = cfg.tune.seeds.size();
  std::vector<MetricRecord> per_seed(suite.size() * seeds);
  std::vector<TuneResult> tuned(per_seed.size());
  run.info("tuning " + std::string(to_string(cfg.tune.method)) + " on " +
           std::to_string(per_seed.size()) + " (family, seed) cells");
  parallel_for(per_seed.size(), parallel, [&](std::size_t task) {
    const std::size_t f = task / seeds;
    per_seed[task] =
        base_to_new_cell(enc, suite[f], encoded[f], cfg.tune, cfg.tune.seeds[task % seeds], &tuned[task]);
  });
  for (std::size_t task = 0; task < tuned.size(); ++task) {
    const std::size_t family = suite[task / seeds].spec.family_id;
    const std::uint64_t seed = cfg.tune.seeds[task % seeds];
    json ckpt = prompt_to_json(tuned[task].learner, enc.checksum());
    ckpt["family"] = family;
    ckpt["seed"] = seed;
    ckpt["tune"] = to_json(cfg.tune);
    ckpt["data"] = to_json(suite[task / seeds].spec);
    const std::string name = cell_name(family, seed);
    run.emit_json("checkpoints/prompt-" + name + ".json", ckpt);
    run.emit("logs/train-" + name + ".csv", training_log_csv(tuned[task].log));
  }
  run.add_metrics(b2n_rows(aggregate_base_to_new(std::move(per_seed), seeds), cfg.eval.verbose));
  if (cfg.eval.zero_shot_baseline) run.add_metrics(zero_shot_rows(enc, suite, encoded, cfg));
}

std::vector<MetricRecord> transfer_rows(const TransferReport& r, const TuneConfig& tune,
                                        std::string_view axis, const std::string& source) {
  std::vector<MetricRecord> rows = r.rows;
  MetricRecord avg;
  avg.method = std::string(to_string(tune.method));
  avg.family = "average";
  avg.axis = std::string(axis);
  avg.value = source;
  avg.base = r.source;
  avg.novel = r.target_average;
  avg.h = std::nan("");
  avg.tokens = rows.empty() ? 0 : rows.front().tokens;
  rows.push_back(avg);
  return rows;
}

void cmd_eval(Run& run, std::size_t parallel) {
  const Config& cfg = run.config();
  const DualEncoder enc = acquire_encoder(cfg, run);
  run.manifest().encoder_checksum = hex_checksum(enc.checksum());

  if (!cfg.eval.checkpoint.empty()) {
    const json ckpt = read_json_file(cfg.eval.checkpoint);
    const PromptLearner learner = prompt_from_json(ckpt, enc);
    TuneConfig tune;
    SyntheticDatasetSpec spec;
    std::uint64_t seed = 0;
    try {
      tune = tune_config_from_json(ckpt.at("tune"));
      spec = spec_from_json(ckpt.at("data"));
      seed = ckpt.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      raise(ErrorKind::kIo, kModule, std::string("prompt checkpoint lacks run metadata: ") + e.what());
    }
    const Dataset dataset = generate_dataset(spec);
    const EncodedDataset data = encode_dataset(enc, dataset);
    record_datasets(run, std::span<const Dataset>(&dataset, 1));
    MetricRecord r = score_base_to_new(enc, dataset, data, learner, tune, seed);
    r.value = fs::path(cfg.eval.checkpoint).filename().string();
    run.add_metrics({r});
    return;
  }

  const std::vector<Dataset> suite = suite_datasets(cfg.data);
  if (cfg.eval.protocol == "base_to_new") {
    const std::vector<EncodedDataset> encoded = encode_suite(enc, suite, parallel);
    record_datasets(run, suite);
    run.add_metrics(b2n_rows(base_to_new(enc, suite, encoded, cfg.tune, false, parallel), cfg.eval.verbose));
    if (cfg.eval.zero_shot_baseline) run.add_metrics(zero_shot_rows(enc, suite, encoded, cfg));
    return;
  }

  SyntheticDatasetSpec source_spec = cfg.data.spec;
  source_spec.family_id = cfg.eval.source_family;
  const Dataset source = generate_dataset(source_spec);
  const EncodedDataset source_data = encode_dataset(enc, source);
  const std::string source_name = family_label(source.spec.family_id);
  record_datasets(run, std::span<const Dataset>(&source, 1));

  if (cfg.eval.protocol == "cross_dataset") {
    std::vector<Dataset> targets;
    for (std::size_t f : cfg.eval.target_families) {
      SyntheticDatasetSpec spec = cfg.data.spec;
      spec.family_id = f;
      targets.push_back(generate_dataset(spec));
    }
    const std::vector<EncodedDataset> encoded = encode_suite(enc, targets, parallel);
    std::vector<TransferTarget> refs;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      refs.push_back({family_label(targets[i].spec.family_id), &targets[i], &encoded[i]});
    }
    record_datasets(run, targets);
    run.add_metrics(transfer_rows(cross_dataset(enc, source, source_data, refs, cfg.tune, parallel),
                                  cfg.tune, "cross_dataset", source_name));
  } else {
    run.add_metrics(transfer_rows(
        domain_shift(enc, source, source_data, cfg.eval.shifts, cfg.tune, parallel), cfg.tune,
        "domain_shift", source_name));
  }
}

void cmd_sweep(Run& run, std::size_t parallel) {
  const Config& cfg = run.config();
  const DualEncoder enc = acquire_encoder(cfg, run);
  run.manifest().encoder_checksum = hex_checksum(enc.checksum());
  const std::vector<Dataset> suite = suite_datasets(cfg.data);
  const std::vector<EncodedDataset> encoded = encode_suite(enc, suite, parallel);
  record_datasets(run, suite);
  if (cfg.sweep.axis == "ablation") {
    run.info("running the MIM-context x kg ablation");
    run.add_metrics(mim_kg_ablation(enc, suite, encoded, cfg.tune, parallel));
    return;
  }
  run.info("sweeping " + cfg.sweep.axis + " over " + std::to_string(cfg.sweep.values.size()) + " values");
  run.add_metrics(sweep(enc, suite, encoded, cfg.tune, parse_sweep_axis(cfg.sweep.axis),
                        cfg.sweep.values, parallel));
}

int cmd_report(const Options& opt, const Config& cfg, std::ostream& out) {
  std::vector<fs::path> dirs;
  if (!opt.runs.empty()) {
    for (const std::string& r : opt.runs) dirs.emplace_back(r);
  } else {
    const fs::path root = cfg.output.root;
    if (fs::is_directory(root)) {
      for (const auto& entry : fs::directory_iterator(root)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_directory() && name.front() != '.' && fs::exists(entry.path() / "manifest.json")) {
          dirs.push_back(entry.path());
        }
      }
    }
    std::sort(dirs.begin(), dirs.end());
  }
  if (dirs.empty()) raise(ErrorKind::kIo, kModule, "no runs found under " + cfg.output.root);
  for (const fs::path& d : dirs) {
    regenerate_run(d);
    out << d.string() << '\n';
  }
  return kExitOk;
}

// ---- plots -----------------------------------------------------------------

std::string series_key(const MetricRecord& r) { return r.method; }

void bar_by_family(const std::vector<MetricRecord>& rows, bool use_h, const std::string& title,
                   const std::string& y_label, const std::string& path,
                   std::map<std::string, std::string>& files) {
  std::vector<std::string> categories;
  std::vector<std::string> methods;
  for (const MetricRecord& r : rows) {
    if (std::find(categories.begin(), categories.end(), r.family) == categories.end()) {
      categories.push_back(r.family);
    }
    if (std::find(methods.begin(), methods.end(), series_key(r)) == methods.end()) {
      methods.push_back(series_key(r));
    }
  }
  std::vector<ChartSeries> series;
  for (const std::string& m : methods) {
    ChartSeries s{m, std::vector<double>(categories.size(), 0.0)};
    for (const MetricRecord& r : rows) {
      if (series_key(r) != m) continue;
      const auto c = std::find(categories.begin(), categories.end(), r.family) - categories.begin();
      s.values[static_cast<std::size_t>(c)] = use_h ? r.h : r.novel;
    }
    series.push_back(std::move(s));
  }
  files[path] = svg_bar_chart(title, categories, series, y_label);
}

}  // namespace

std::map<std::string, std::string> render_outputs(const RunManifest& manifest) {
  std::vector<MetricRecord> rows;
  for (const json& j : manifest.metrics) rows.push_back(metric_from_json(j));
  std::map<std::string, std::string> files;
  files["metrics.csv"] = results_csv(rows);
  const std::string plot = "plots/" + manifest.run_id + ".svg";

  std::vector<MetricRecord> b2n, transfer, swept, ablation;
  for (const MetricRecord& r : rows) {
    if (r.seed) continue;
    if (r.axis == "base_to_new") b2n.push_back(r);
    else if (r.axis == "cross_dataset" || r.axis == "domain_shift") transfer.push_back(r);
    else if (r.axis == "ablation") ablation.push_back(r);
    else if (r.axis == "mask_ratio" || r.axis == "lambda" || r.axis == "shots" || r.axis == "strategy")
      swept.push_back(r);
  }
  if (!swept.empty()) {
    std::vector<std::string> xs;
    ChartSeries base{"base", {}}, novel{"new", {}}, h{"H", {}};
    for (const MetricRecord& r : swept) {
      xs.push_back(r.value);
      base.values.push_back(r.base);
      novel.values.push_back(r.novel);
      h.values.push_back(r.h);
    }
    const std::vector<ChartSeries> series{base, novel, h};
    files[plot] = svg_line_chart("sweep over " + swept.front().axis, xs, series, "accuracy (%)");
  } else if (!ablation.empty()) {
    std::vector<std::string> cats;
    ChartSeries base{"base", {}}, novel{"new", {}}, h{"H", {}};
    for (const MetricRecord& r : ablation) {
      cats.push_back(r.value);
      base.values.push_back(r.base);
      novel.values.push_back(r.novel);
      h.values.push_back(r.h);
    }
    const std::vector<ChartSeries> series{base, novel, h};
    files[plot] = svg_bar_chart("MIM-context x knowledge guidance", cats, series, "accuracy (%)");
  } else if (!transfer.empty()) {
    bar_by_family(transfer, false, transfer.front().axis + " target accuracy", "accuracy (%)", plot, files);
  } else if (!b2n.empty()) {
    bar_by_family(b2n, true, "base-to-new harmonic mean", "H (%)", plot, files);
  }

  if (manifest.extra.contains("pretrain_loss")) {
    std::vector<std::string> xs;
    ChartSeries loss{"contrastive loss", {}};
    for (const json& p : manifest.extra.at("pretrain_loss")) {
      xs.push_back(std::to_string(p.at(0).get<std::size_t>()));
      loss.values.push_back(p.at(1).get<double>());
    }
    const std::vector<ChartSeries> series{loss};
    if (!xs.empty()) {
      files["plots/" + manifest.run_id + "-loss.svg"] =
          svg_line_chart("pretraining loss", xs, series, "loss");
    }
  }
  return files;
}

void regenerate_run(const fs::path& run_dir) {
  const RunManifest manifest = manifest_from_json(read_json_file(run_dir / "manifest.json"));
  for (const auto& [rel, text] : render_outputs(manifest)) write_text_file(run_dir / rel, text);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"ProMIM prompt-tuning lab", "promim"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config, "JSON config file");
    sub->add_option("--set", opt.overrides, "Override a config value: dotted.key=value");
    sub->add_flag("-q,--quiet", opt.quiet, "Suppress progress messages");
  };
  auto add_run = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("--from-manifest", opt.from_manifest,
                    "Re-run with the resolved config recorded in a manifest.json");
  };
  CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "Contrastively pretrain the dual encoder");
  add_run(pretrain_cmd);
  CLI::App* tune_cmd = app.add_subcommand("tune", "Tune prompts on every (family, seed) cell");
  add_run(tune_cmd);
  tune_cmd->add_option("--parallel", opt.parallel, "Worker threads for independent cells")
      ->check(CLI::PositiveNumber);
  CLI::App* eval_cmd = app.add_subcommand("eval", "Run an evaluation protocol or score a checkpoint");
  add_run(eval_cmd);
  eval_cmd->add_option("--checkpoint", opt.checkpoint, "Prompt checkpoint to score");
  eval_cmd->add_option("--parallel", opt.parallel, "Worker threads for independent cells")
      ->check(CLI::PositiveNumber);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep one axis over the suite");
  add_run(sweep_cmd);
  sweep_cmd->add_option("--parallel", opt.parallel, "Worker threads for independent cells")
      ->check(CLI::PositiveNumber);
  CLI::App* report_cmd = app.add_subcommand("report", "Regenerate CSV and SVG files from manifests");
  add_common(report_cmd);
  report_cmd->add_option("runs", opt.runs, "Run directories (default: every run under the output root)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "promim: " << e.what() << '\n';
    return kExitUsage;
  }
  for (CLI::App* sub : app.get_subcommands()) opt.command = sub->get_name();

  Config cfg;
  try {
    json base = json::object();
    if (opt.from_manifest) {
      if (opt.config) throw UsageError("--config and --from-manifest are mutually exclusive");
      const RunManifest m = manifest_from_json(read_json_file(*opt.from_manifest));
      if (m.command != opt.command) {
        throw UsageError("manifest was written by '" + m.command + "', not '" + opt.command + "'");
      }
      base = m.config;
    } else if (opt.config) {
      base = read_json_file(*opt.config);
    }
    bool root_overridden = false;
    for (const std::string& o : opt.overrides) root_overridden |= o.rfind("output.root=", 0) == 0;
    std::vector<std::string> overrides = opt.overrides;
    if (!opt.checkpoint.empty()) overrides.push_back("eval.checkpoint=\"" + opt.checkpoint + "\"");
    if (const char* env = std::getenv(kOutputRootEnv); env && *env && !root_overridden) {
      overrides.insert(overrides.begin(), std::string("output.root=") + json(env).dump());
    }
    cfg = resolve_config(std::move(base), overrides);
  } catch (const UsageError& e) {
    err << "promim: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "promim: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (opt.command == "report") return cmd_report(opt, cfg, out);
    Run run(cfg, opt.command, err, opt.quiet);
    if (opt.command == "pretrain") cmd_pretrain(run);
    else if (opt.command == "tune") cmd_tune(run, opt.parallel);
    else if (opt.command == "eval") cmd_eval(run, opt.parallel);
    else if (opt.command == "sweep") cmd_sweep(run, opt.parallel);
    std::vector<MetricRecord> rows;
    for (const json& j : run.manifest().metrics) rows.push_back(metric_from_json(j));
    const fs::path dir = run.commit();
    summarize(out, rows);
    out << "run: " << dir.string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "promim: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "promim: [cli] " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace promim::cli
