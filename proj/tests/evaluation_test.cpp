#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "promim/evaluation.hpp"
#include "promim/report.hpp"
#include "test_support.hpp"

namespace promim {
namespace {

using testing::error_kind;

class ConstantClassifier final : public Classifier {
 public:
  std::vector<std::size_t> predict(const EncodedDataset&, std::span<const std::size_t> samples,
                                   std::span<const std::size_t>) const override {
    return std::vector<std::size_t>(samples.size(), 0);
  }
};

class OracleClassifier final : public Classifier {
 public:
  std::vector<std::size_t> predict(const EncodedDataset& data, std::span<const std::size_t> samples,
                                   std::span<const std::size_t> classes) const override {
    std::vector<std::size_t> out;
    for (std::size_t s : samples) {
      for (std::size_t c = 0; c < classes.size(); ++c) {
        if (classes[c] == data.labels[s]) out.push_back(c);
      }
    }
    return out;
  }
};

TuneConfig quick_config() {
  TuneConfig cfg;
  cfg.epochs = 1;
  cfg.shots = 4;
  cfg.seeds = {0};
  return cfg;
}

MetricRecord record(double base, double novel) {
  MetricRecord r;
  r.method = "promim";
  r.family = "family0";
  r.base = base;
  r.novel = novel;
  r.h = harmonic_mean(base, novel);
  return r;
}

TEST(Accuracy, Percentages) {
  const std::vector<std::size_t> truth{0, 1, 2, 3};
  EXPECT_EQ(accuracy(truth, truth), 100.0);
  EXPECT_EQ(accuracy(std::vector<std::size_t>{0, 0, 0, 0}, truth), 25.0);
  EXPECT_EQ(error_kind([] { accuracy({}, {}); }), ErrorKind::kInput);
  EXPECT_EQ(error_kind([&] { accuracy(std::vector<std::size_t>{0}, truth); }), ErrorKind::kDimension);
}

class SmallDataFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dataset_ = new Dataset(generate_dataset(SyntheticDatasetSpec{}));
    encoded_ = new EncodedDataset(encode_dataset(testing::default_encoder(), *dataset_));
  }
  static void TearDownTestSuite() {
    delete encoded_;
    delete dataset_;
  }
  static Dataset* dataset_;
  static EncodedDataset* encoded_;
};
Dataset* SmallDataFixture::dataset_ = nullptr;
EncodedDataset* SmallDataFixture::encoded_ = nullptr;

TEST_F(SmallDataFixture, OracleAndChanceClassifiers) {
  const SplitPlan plan = make_full_split(*dataset_, 4, 0);
  EXPECT_EQ(evaluate_accuracy(OracleClassifier{}, *encoded_, plan.eval_base, plan.base_classes), 100.0);
  // Balanced eval set: always answering the first class scores exactly 1/C.
  EXPECT_DOUBLE_EQ(evaluate_accuracy(ConstantClassifier{}, *encoded_, plan.eval_base, plan.base_classes),
                   100.0 / 8.0);
  const std::vector<std::size_t> one{plan.base_classes[0]};
  EXPECT_EQ(error_kind([&] { evaluate_accuracy(OracleClassifier{}, *encoded_, plan.eval_base, one); }),
            ErrorKind::kInput);
}

TEST(HarmonicMean, PublishedPairs) {
  EXPECT_NEAR(harmonic_mean(82.69, 63.22), 71.66, 0.01);
  EXPECT_NEAR(harmonic_mean(80.64, 73.96), 77.16, 0.01);
}

TEST(HarmonicMean, Properties) {
  for (double x : {0.5, 12.5, 50.0, 100.0}) EXPECT_DOUBLE_EQ(harmonic_mean(x, x), x);
  EXPECT_DOUBLE_EQ(harmonic_mean(30.0, 70.0), harmonic_mean(70.0, 30.0));
  EXPECT_LE(harmonic_mean(30.0, 70.0), 50.0);
  EXPECT_GE(harmonic_mean(30.0, 70.0), 30.0);
}

TEST(HarmonicMean, NonPositiveIsInputError) {
  EXPECT_EQ(error_kind([] { harmonic_mean(0.0, 50.0); }), ErrorKind::kInput);
  EXPECT_EQ(error_kind([] { harmonic_mean(50.0, -1.0); }), ErrorKind::kInput);
  EXPECT_EQ(error_kind([] { harmonic_mean(std::nan(""), 50.0); }), ErrorKind::kInput);
}

TEST(AggregateBaseToNew, AveragesBeforeHarmonicMean) {
  std::vector<MetricRecord> rows{record(80, 40), record(60, 60), record(90, 30), record(70, 50)};
  rows[2].family = rows[3].family = "family1";
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].seed = i % 2;
  const BaseToNewReport r = aggregate_base_to_new(rows, 2);
  ASSERT_EQ(r.per_family.size(), 2u);
  EXPECT_EQ(r.per_family[0].base, 70.0);
  EXPECT_EQ(r.per_family[0].novel, 50.0);
  EXPECT_DOUBLE_EQ(r.per_family[0].h, harmonic_mean(70.0, 50.0));
  EXPECT_FALSE(r.per_family[0].seed.has_value());
  EXPECT_EQ(r.per_family[1].family, "family1");
  EXPECT_EQ(r.average.base, 75.0);
  EXPECT_EQ(r.average.novel, 45.0);
  EXPECT_DOUBLE_EQ(r.average.h, harmonic_mean(75.0, 45.0));
  EXPECT_DOUBLE_EQ(r.mean_of_h, (harmonic_mean(70.0, 50.0) + harmonic_mean(80.0, 40.0)) / 2.0);
  EXPECT_EQ(error_kind([&] { aggregate_base_to_new(rows, 3); }), ErrorKind::kInput);
}

TEST_F(SmallDataFixture, RecordHarmonicMeanIsConsistent) {
  const MetricRecord r = base_to_new_cell(testing::default_encoder(), *dataset_, *encoded_,
                                          quick_config(), 0);
  EXPECT_DOUBLE_EQ(r.h, harmonic_mean(r.base, r.novel));
  EXPECT_EQ(r.method, "promim");
  EXPECT_EQ(r.seed, std::optional<std::uint64_t>(0));
}

TEST_F(SmallDataFixture, ZeroShotIsSeedInvariant) {
  const DualEncoder& enc = testing::default_encoder();
  const MetricRecord a = zero_shot_cell(enc, *dataset_, *encoded_, 16);
  const MetricRecord b = zero_shot_cell(enc, *dataset_, *encoded_, 16);
  EXPECT_EQ(a.base, b.base);
  EXPECT_EQ(a.novel, b.novel);
  EXPECT_EQ(a.tokens, 0u);
  EXPECT_GT(a.base, 100.0 / 4.0);
}

TEST_F(SmallDataFixture, PromimWithoutMaskOrKgMatchesCocoop) {
  const DualEncoder& enc = testing::default_encoder();
  TuneConfig promim = quick_config();
  promim.lambda = 0.0;
  promim.mask.ratio = 0.0;
  TuneConfig cocoop = promim;
  cocoop.method = TuneMethod::kCocoop;
  const MetricRecord a = base_to_new_cell(enc, *dataset_, *encoded_, promim, 0);
  const MetricRecord b = base_to_new_cell(enc, *dataset_, *encoded_, cocoop, 0);
  EXPECT_EQ(a.base, b.base);
  EXPECT_EQ(a.novel, b.novel);
}

TEST_F(SmallDataFixture, TransferToSourceItselfMatchesSourceAccuracy) {
  const TransferTarget self{"self", dataset_, encoded_};
  const TransferReport r =
      evaluate_transfer(testing::default_encoder(), *dataset_, *encoded_, {&self, 1}, quick_config(), "test");
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].novel, r.source);
  EXPECT_EQ(r.target_average, r.source);
}

TEST_F(SmallDataFixture, CrossDatasetRejectsOverlap) {
  const DualEncoder& enc = testing::default_encoder();
  const TransferTarget self{"self", dataset_, encoded_};
  EXPECT_EQ(error_kind([&] { cross_dataset(enc, *dataset_, *encoded_, {&self, 1}, quick_config()); }),
            ErrorKind::kInput);
  SyntheticDatasetSpec spec;
  spec.family_id = 1;
  Dataset shared = generate_dataset(spec);
  shared.class_names[3] = dataset_->class_names[0];
  const TransferTarget overlap{"overlap", &shared, encoded_};
  EXPECT_EQ(error_kind([&] { cross_dataset(enc, *dataset_, *encoded_, {&overlap, 1}, quick_config()); }),
            ErrorKind::kInput);
}

TEST_F(SmallDataFixture, IdentityShiftsMatchSource) {
  const std::vector<Shift> shifts{Shift{}, Shift{ShiftKind::kNoise, 0.0}};
  const TransferReport r =
      domain_shift(testing::default_encoder(), *dataset_, *encoded_, shifts, quick_config());
  ASSERT_EQ(r.rows.size(), 2u);
  for (const MetricRecord& row : r.rows) EXPECT_EQ(row.novel, r.source) << row.family;
  EXPECT_EQ(r.rows[1].family, "noise@0");
}

TEST_F(SmallDataFixture, AccuracyFallsWithNoise) {
  TuneConfig cfg = quick_config();
  cfg.epochs = 2;
  cfg.shots = 8;
  const std::vector<Shift> shifts{Shift{ShiftKind::kNoise, 0.0}, Shift{ShiftKind::kNoise, 0.1},
                                  Shift{ShiftKind::kNoise, 0.3}};
  const TransferReport r = domain_shift(testing::default_encoder(), *dataset_, *encoded_, shifts, cfg);
  EXPECT_GE(r.rows[0].novel, r.rows[1].novel);
  EXPECT_GE(r.rows[1].novel, r.rows[2].novel);
}

TEST(ApplyAxis, SetsFieldAndRejectsBadValues) {
  const TuneConfig cfg;
  EXPECT_EQ(apply_axis(cfg, SweepAxis::kMaskRatio, "0.5").mask.ratio, 0.5);
  EXPECT_EQ(apply_axis(cfg, SweepAxis::kLambda, "8").lambda, 8.0);
  EXPECT_EQ(apply_axis(cfg, SweepAxis::kShots, "4").shots, 4u);
  EXPECT_EQ(apply_axis(cfg, SweepAxis::kStrategy, "block").mask.strategy, MaskStrategy::kBlock);
  for (const auto& [axis, value] : std::vector<std::pair<SweepAxis, std::string>>{
           {SweepAxis::kMaskRatio, "1.0"}, {SweepAxis::kMaskRatio, "-0.1"}, {SweepAxis::kMaskRatio, "x"},
           {SweepAxis::kLambda, "-1"}, {SweepAxis::kLambda, "inf"}, {SweepAxis::kShots, "0"},
           {SweepAxis::kShots, "2.5"}, {SweepAxis::kStrategy, "grid"}}) {
    EXPECT_EQ(error_kind([&] { apply_axis(cfg, axis, value); }), ErrorKind::kInput) << value;
  }
  EXPECT_EQ(error_kind([] { parse_sweep_axis("epochs"); }), ErrorKind::kInput);
  for (SweepAxis a : {SweepAxis::kMaskRatio, SweepAxis::kLambda, SweepAxis::kShots, SweepAxis::kStrategy}) {
    EXPECT_EQ(parse_sweep_axis(to_string(a)), a);
  }
}

class SuiteFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SyntheticDatasetSpec spec;
    spec.samples_per_class = 16;
    suite_ = new std::vector<Dataset>(generate_suite(spec, 2));
    encoded_ = new std::vector<EncodedDataset>(encode_suite(testing::default_encoder(), *suite_));
  }
  static void TearDownTestSuite() {
    delete encoded_;
    delete suite_;
  }
  static std::vector<Dataset>* suite_;
  static std::vector<EncodedDataset>* encoded_;
};
std::vector<Dataset>* SuiteFixture::suite_ = nullptr;
std::vector<EncodedDataset>* SuiteFixture::encoded_ = nullptr;

TEST_F(SuiteFixture, ParallelEqualsSerial) {
  TuneConfig cfg = quick_config();
  cfg.seeds = {0, 1};
  const DualEncoder& enc = testing::default_encoder();
  const BaseToNewReport serial = base_to_new(enc, *suite_, *encoded_, cfg, false, 1);
  const BaseToNewReport parallel = base_to_new(enc, *suite_, *encoded_, cfg, false, 3);
  EXPECT_EQ(results_csv(serial.per_seed), results_csv(parallel.per_seed));
  EXPECT_EQ(serial.per_seed.size(), 4u);
  EXPECT_EQ(serial.per_family.size(), 2u);
}

TEST_F(SuiteFixture, SingleValueSweepEqualsBaseToNew) {
  const DualEncoder& enc = testing::default_encoder();
  const TuneConfig cfg = quick_config();
  const std::vector<std::string> values{"2"};
  const auto rows = sweep(enc, *suite_, *encoded_, cfg, SweepAxis::kLambda, values);
  ASSERT_EQ(rows.size(), 1u);
  const MetricRecord avg = base_to_new(enc, *suite_, *encoded_, cfg).average;
  EXPECT_EQ(rows[0].base, avg.base);
  EXPECT_EQ(rows[0].novel, avg.novel);
  EXPECT_EQ(rows[0].axis, "lambda");
  EXPECT_EQ(rows[0].value, "2");
}

TEST_F(SuiteFixture, GridsProduceOneRowPerValue) {
  const DualEncoder& enc = testing::default_encoder();
  const std::vector<Dataset> one(suite_->begin(), suite_->begin() + 1);
  const std::vector<EncodedDataset> one_enc(encoded_->begin(), encoded_->begin() + 1);
  const std::vector<std::string> ratios{"0.25", "0.5", "0.75", "0.95", "0.99"};
  const std::vector<std::string> lambdas{"0", "1", "2", "4", "6", "8", "10"};
  EXPECT_EQ(sweep(enc, one, one_enc, quick_config(), SweepAxis::kMaskRatio, ratios).size(), 5u);
  EXPECT_EQ(sweep(enc, one, one_enc, quick_config(), SweepAxis::kLambda, lambdas).size(), 7u);
  const std::vector<std::string> bad{"0.5", "1.5"};
  EXPECT_EQ(error_kind([&] { sweep(enc, one, one_enc, quick_config(), SweepAxis::kMaskRatio, bad); }),
            ErrorKind::kInput);
}

TEST(ResultsCsv, HeaderAndEmptyCells) {
  MetricRecord r = record(50, 25);
  r.h = std::nan("");
  r.tokens = 7;
  const std::string csv = results_csv(std::vector<MetricRecord>{r});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,family,axis,value,seed,base,new,h,tokens");
  const std::string line = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(line.back(), '\n');
  EXPECT_NE(line.find(",,7"), std::string::npos) << line;
}

TEST(Report, SvgIsDeterministic) {
  const std::vector<ChartSeries> series{{"promim", {70.0, 65.0}}, {"cocoop", {68.0, 60.0}}};
  const std::vector<std::string> cats{"base", "new"};
  EXPECT_EQ(svg_bar_chart("t", cats, series, "acc"), svg_bar_chart("t", cats, series, "acc"));
  EXPECT_EQ(svg_line_chart("t", cats, series, "acc"), svg_line_chart("t", cats, series, "acc"));
  EXPECT_NE(svg_bar_chart("t", cats, series, "acc").find("<svg"), std::string::npos);
}

TEST(Report, MetricJsonRoundTrip) {
  MetricRecord r = record(61.5, 42.25);
  r.seed = 2;
  r.tokens = 11;
  const MetricRecord back = metric_from_json(to_json(r));
  EXPECT_EQ(back.method, r.method);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.base, r.base);
  EXPECT_EQ(back.h, r.h);
  EXPECT_EQ(back.tokens, r.tokens);
}

}  // namespace
}  // namespace promim
