#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "promim/checkpoint.hpp"
#include "promim/config.hpp"
#include "test_support.hpp"

namespace promim {
namespace {

using nlohmann::json;
using testing::error_kind;

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "promim-checkpoint-test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(EncoderCheckpoint, RoundTripIsExact) {
  const DualEncoder enc = DualEncoder::initialize(testing::tiny_encoder_config(), 3);
  const DualEncoder back = encoder_from_json(encoder_to_json(enc));
  EXPECT_TRUE(back.frozen());
  EXPECT_EQ(back.checksum(), enc.checksum());
  EXPECT_EQ(back.config(), enc.config());
  const auto a = enc.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].tensor.to_vector(), b[i].tensor.to_vector()) << a[i].name;
  }
}

TEST(EncoderCheckpoint, FileRoundTrip) {
  const DualEncoder& enc = testing::default_encoder();
  const auto path = scratch("encoder.json");
  save_encoder(enc, path);
  EXPECT_EQ(load_encoder(path).checksum(), enc.checksum());
}

TEST(EncoderCheckpoint, RejectsTampering) {
  const DualEncoder enc = DualEncoder::initialize(testing::tiny_encoder_config(), 4);
  const json good = encoder_to_json(enc);
  const std::string first = enc.parameters().front().name;

  json values = good;
  values["parameters"][first]["data"][0] = values["parameters"][first]["data"][0].get<double>() + 1.0;
  EXPECT_EQ(error_kind([&] { encoder_from_json(values); }), ErrorKind::kIo);

  json shape = good;
  shape["parameters"][first]["shape"][0] = 999;
  EXPECT_EQ(error_kind([&] { encoder_from_json(shape); }), ErrorKind::kDimension);

  json missing = good;
  missing["parameters"].erase(first);
  EXPECT_EQ(error_kind([&] { encoder_from_json(missing); }), ErrorKind::kDimension);

  json version = good;
  version["version"] = kCheckpointVersion + 1;
  EXPECT_EQ(error_kind([&] { encoder_from_json(version); }), ErrorKind::kIo);

  json format = good;
  format["format"] = "promim-prompt";
  EXPECT_EQ(error_kind([&] { encoder_from_json(format); }), ErrorKind::kIo);
}

TEST(PromptCheckpoint, RoundTripForEveryMethod) {
  const DualEncoder enc = DualEncoder::initialize(testing::tiny_encoder_config(), 5);
  for (TuneMethod m : {TuneMethod::kCoop, TuneMethod::kCocoop, TuneMethod::kKgcoop, TuneMethod::kPromim}) {
    const PromptLearner learner = PromptLearner::initialize(m, enc.config(), 4, 4, 9);
    const PromptLearner back = prompt_from_json(prompt_to_json(learner, enc.checksum()), enc);
    EXPECT_EQ(back.method, m);
    EXPECT_EQ(back.checksum(), learner.checksum());
    EXPECT_EQ(back.meta.has_value(), learner.meta.has_value());
  }
}

TEST(PromptCheckpoint, RejectsForeignEncoderAndBadShapes) {
  const DualEncoder enc = DualEncoder::initialize(testing::tiny_encoder_config(), 5);
  const DualEncoder other = DualEncoder::initialize(testing::tiny_encoder_config(), 6);
  const PromptLearner learner = PromptLearner::initialize(TuneMethod::kPromim, enc.config(), 4, 4, 9);
  const json good = prompt_to_json(learner, enc.checksum());
  EXPECT_EQ(error_kind([&] { prompt_from_json(good, other); }), ErrorKind::kIo);

  json shape = good;
  shape["parameters"]["context"]["shape"][1] = 3;
  EXPECT_EQ(error_kind([&] { prompt_from_json(shape, enc); }), ErrorKind::kDimension);

  json extra = good;
  extra["parameters"]["stray"] = extra["parameters"]["context"];
  EXPECT_EQ(error_kind([&] { prompt_from_json(extra, enc); }), ErrorKind::kDimension);
}

TEST(JsonFiles, MissingAndMalformed) {
  EXPECT_EQ(error_kind([] { read_json_file(scratch("does-not-exist.json")); }), ErrorKind::kIo);
  const auto bad = scratch("bad.json");
  write_text_file(bad, "{not json");
  EXPECT_EQ(error_kind([&] { read_json_file(bad); }), ErrorKind::kIo);
  const auto good = scratch("good.json");
  write_json_file(good, json{{"a", 1.25}});
  EXPECT_EQ(read_json_file(good).at("a"), 1.25);
}

TEST(Config, DefaultsMatchPublishedSettings) {
  const Config cfg = load_config(std::nullopt, {});
  EXPECT_EQ(cfg.tune.method, TuneMethod::kPromim);
  EXPECT_EQ(cfg.tune.lr, 0.02);
  EXPECT_EQ(cfg.tune.context_length, 4u);
  EXPECT_EQ(cfg.tune.lambda, 2.0);
  EXPECT_EQ(cfg.tune.epochs, 10u);
  EXPECT_EQ(cfg.tune.batch_size, 1u);
  EXPECT_EQ(cfg.tune.shots, 16u);
  EXPECT_EQ(cfg.tune.mask.ratio, 0.75);
  EXPECT_EQ(cfg.tune.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(cfg.sweep.values, (std::vector<std::string>{"0", "1", "2", "4", "6", "8", "10"}));
  EXPECT_EQ(cfg.resolved, config_from_json(default_config_json()).resolved);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_EQ(error_kind([] { config_from_json(json{{"tune", {{"learning_rate", 0.1}}}}); }),
            ErrorKind::kInput);
  EXPECT_EQ(error_kind([] { config_from_json(json{{"extras", 1}}); }), ErrorKind::kInput);
  const std::vector<std::string> bad{"tune.nope=1"};
  EXPECT_EQ(error_kind([&] { load_config(std::nullopt, bad); }), ErrorKind::kInput);
  const std::vector<std::string> section{"tune=1"};
  EXPECT_EQ(error_kind([&] { load_config(std::nullopt, section); }), ErrorKind::kInput);
  const std::vector<std::string> no_eq{"tune.lr"};
  EXPECT_EQ(error_kind([&] { load_config(std::nullopt, no_eq); }), ErrorKind::kInput);
}

TEST(Config, BadValuesAreRejected) {
  for (const std::string& ov : {"tune.lr=\"fast\"", "tune.mask.ratio=1.0", "tune.lambda=-1",
                                "eval.protocol=zero", "data.families=0", "tune.method=clip"}) {
    const std::vector<std::string> o{ov};
    EXPECT_EQ(error_kind([&] { load_config(std::nullopt, o); }), ErrorKind::kInput) << ov;
  }
}

TEST(Config, OverridesBeatFileBeatDefaults) {
  const auto path = scratch("config.json");
  write_json_file(path, json{{"tune", {{"lambda", 4.0}, {"epochs", 3}}}});
  const std::vector<std::string> ov{"tune.lambda=8", "tune.method=kgcoop", "tune.seeds=[5]"};
  const Config cfg = load_config(path, ov);
  EXPECT_EQ(cfg.tune.lambda, 8.0);
  EXPECT_EQ(cfg.tune.epochs, 3u);
  EXPECT_EQ(cfg.tune.method, TuneMethod::kKgcoop);
  EXPECT_EQ(cfg.tune.seeds, (std::vector<std::uint64_t>{5}));
  EXPECT_EQ(cfg.tune.lr, 0.02);
  EXPECT_EQ(cfg.resolved.at("tune").at("lambda"), 8.0);
  EXPECT_EQ(error_kind([] { load_config(scratch("missing-config.json"), {}); }), ErrorKind::kInput);
}

TEST(Config, ResolvedRoundTrips) {
  const std::vector<std::string> ov{"tune.mask.strategy=block", "sweep.axis=mask_ratio",
                                    "sweep.values=[0.25, 0.5]"};
  const Config cfg = load_config(std::nullopt, ov);
  EXPECT_EQ(cfg.sweep.values, (std::vector<std::string>{"0.25", "0.5"}));
  const Config again = config_from_json(cfg.resolved);
  EXPECT_EQ(again.resolved, cfg.resolved);
  EXPECT_EQ(again.tune.mask.strategy, MaskStrategy::kBlock);
}

TEST(Config, SuiteAndPretrainCorpusUseDistinctSamples) {
  const Config cfg = load_config(std::nullopt, {});
  const auto suite = suite_datasets(cfg.data);
  const auto corpus = pretrain_corpus(cfg);
  ASSERT_EQ(suite.size(), 6u);
  ASSERT_EQ(corpus.size(), 7u);
  EXPECT_EQ(suite[0].class_names, corpus[0].class_names);
  EXPECT_NE(suite[0].pixel_checksum(), corpus[0].pixel_checksum());
}

}  // namespace
}  // namespace promim
