#include <benchmark/benchmark.h>

#include <string>

#include "promim/data.hpp"
#include "promim/masking.hpp"
#include "promim/training.hpp"

namespace promim {
namespace {

struct Fixture {
  DualEncoder encoder = [] {
    DualEncoder e = DualEncoder::initialize(EncoderConfig{}, 1);
    e.freeze();
    return e;
  }();
  Dataset dataset = generate_dataset(SyntheticDatasetSpec{});
  EncodedDataset data = encode_dataset(encoder, dataset);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

// Vision cost at mask ratio state.range(0) / 100.
void BM_VisionEncode(benchmark::State& state) {
  Fixture& f = fixture();
  const double ratio = static_cast<double>(state.range(0)) / 100.0;
  Rng rng(2);
  const MaskResult mask = sample_random_mask(f.data.grids[0].size(), ratio, rng);
  NoGradGuard guard;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vision_encode(f.encoder, f.data.grids[0], mask.visible).embedding);
  }
  state.counters["tokens"] = static_cast<double>(mask.visible.size() + 1);
}
BENCHMARK(BM_VisionEncode)->Arg(0)->Arg(50)->Arg(75)->Arg(95);

void BM_TextEncode(benchmark::State& state) {
  Fixture& f = fixture();
  const auto tokens = f.encoder.vocabulary().tokenize("a photo of a dog");
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(text_encode(f.encoder, tokens));
}
BENCHMARK(BM_TextEncode);

// One epoch over 4 shots of the 4 base classes.
void BM_TuneEpoch(benchmark::State& state) {
  Fixture& f = fixture();
  TuneConfig cfg;
  cfg.method = static_cast<TuneMethod>(state.range(0));
  cfg.epochs = 1;
  cfg.shots = 4;
  const SplitPlan split = make_split(f.dataset, cfg.shots, 0);
  for (auto _ : state) benchmark::DoNotOptimize(tune(f.encoder, f.data, split, cfg, 0).tokens_processed);
  state.SetLabel(std::string(to_string(cfg.method)));
}
BENCHMARK(BM_TuneEpoch)
    ->Arg(static_cast<int>(TuneMethod::kCoop))
    ->Arg(static_cast<int>(TuneMethod::kCocoop))
    ->Arg(static_cast<int>(TuneMethod::kPromim))
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace promim

BENCHMARK_MAIN();
