#include "promim/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "promim/error.hpp"
#include "promim/random.hpp"

namespace promim {

namespace {

constexpr std::string_view kModule = "data";

constexpr std::uint64_t kClassPermutationTag = 0x636c6173ULL;
constexpr std::uint64_t kShotTag = 0x73686f74ULL;
constexpr std::uint64_t kShiftTag = 0x73686674ULL;

std::uint64_t sample_id(std::size_t family, std::size_t cls, std::size_t index) {
  return (static_cast<std::uint64_t>(family) << 40) | (static_cast<std::uint64_t>(cls) << 20) |
         static_cast<std::uint64_t>(index);
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

template <typename T>
void write_le(std::ofstream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts not supported");
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

std::string_view to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::kNone:
      return "none";
    case ShiftKind::kBrightness:
      return "brightness";
    case ShiftKind::kNoise:
      return "noise";
    case ShiftKind::kInvert:
      return "invert";
  }
  return "none";
}

ShiftKind parse_shift_kind(std::string_view name) {
  if (name == "none") return ShiftKind::kNone;
  if (name == "brightness") return ShiftKind::kBrightness;
  if (name == "noise") return ShiftKind::kNoise;
  if (name == "invert") return ShiftKind::kInvert;
  raise(ErrorKind::kInput, kModule, "unknown shift kind '" + std::string(name) + "'");
}

void SyntheticDatasetSpec::validate() const {
  if (n_classes < 4) raise(ErrorKind::kInput, kModule, "n_classes must be at least 4");
  if (samples_per_class < 2) raise(ErrorKind::kInput, kModule, "samples_per_class must be >= 2");
  if (!(noise_std >= 0.0)) raise(ErrorKind::kInput, kModule, "noise_std must be non-negative");
  if (image_side == 0 || channels == 0) raise(ErrorKind::kInput, kModule, "empty image shape");
  if (shift.kind == ShiftKind::kNoise && !(shift.magnitude >= 0.0)) {
    raise(ErrorKind::kInput, kModule, "noise shift magnitude must be non-negative");
  }
  const std::size_t available = standard_class_names().size();
  if ((family_id + 1) * n_classes > available) {
    raise(ErrorKind::kInput, kModule,
          "family " + std::to_string(family_id) + " with " + std::to_string(n_classes) +
              " classes exceeds the " + std::to_string(available) + "-name vocabulary");
  }
}

std::vector<std::string> family_class_names(std::size_t family_id, std::size_t n_classes) {
  const auto names = standard_class_names();
  if ((family_id + 1) * n_classes > names.size()) {
    raise(ErrorKind::kInput, kModule, "not enough class names in the vocabulary");
  }
  std::vector<std::string> out;
  for (std::size_t c = 0; c < n_classes; ++c) out.emplace_back(names[family_id * n_classes + c]);
  return out;
}

std::uint64_t Dataset::pixel_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Sample& s : samples) h = checksum(s.image.pixels, h);
  return h;
}

// Sum of three seeded low-frequency plane waves per channel, rescaled to
// [0.1, 0.9] so brightness shifts have headroom before clamping.
Image make_prototype(const SyntheticDatasetSpec& spec, std::size_t class_index) {
  Rng rng(derive_seed(spec.prototypes_seed, {spec.family_id, class_index}));
  Image img;
  img.side = spec.image_side;
  img.channels = spec.channels;
  img.pixels.assign(spec.image_side * spec.image_side * spec.channels, 0.0);
  const double side = static_cast<double>(spec.image_side);
  for (std::size_t c = 0; c < spec.channels; ++c) {
    for (int k = 0; k < 3; ++k) {
      std::uint64_t fx = 0, fy = 0;
      while (fx == 0 && fy == 0) {
        fx = rng.below(3);
        fy = rng.below(3);
      }
      const double amp = rng.uniform(0.5, 1.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t y = 0; y < spec.image_side; ++y)
        for (std::size_t x = 0; x < spec.image_side; ++x) {
          const double arg = 2.0 * std::numbers::pi * (double(fx) * double(x) + double(fy) * double(y)) / side;
          img.at(y, x, c) += amp * std::cos(arg + phase);
        }
    }
  }
  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double mn = *lo, range = std::max(*hi - *lo, 1e-12);
  for (double& p : img.pixels) p = 0.1 + 0.8 * (p - mn) / range;
  return img;
}

Dataset generate_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  ds.spec.shift = Shift{};
  ds.class_names = family_class_names(spec.family_id, spec.n_classes);
  ds.samples.reserve(spec.n_classes * spec.samples_per_class);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    ds.prototypes.push_back(make_prototype(spec, c));
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      Sample s;
      s.label = c;
      s.class_name = ds.class_names[c];
      s.index_in_class = i;
      s.id = sample_id(spec.family_id, c, i);
      s.image = ds.prototypes.back();
      if (spec.noise_std > 0.0) {
        Rng rng(derive_seed(spec.sample_seed, {spec.family_id, c, i}));
        for (double& p : s.image.pixels) p = std::clamp(p + rng.normal(0.0, spec.noise_std), 0.0, 1.0);
      }
      ds.samples.push_back(std::move(s));
    }
  }
  if (spec.shift.kind != ShiftKind::kNone) return apply_shift(ds, spec.shift);
  return ds;
}

Dataset apply_shift(const Dataset& dataset, const Shift& shift) {
  if (shift.kind == ShiftKind::kNoise && !(shift.magnitude >= 0.0)) {
    raise(ErrorKind::kInput, kModule, "noise shift magnitude must be non-negative");
  }
  Dataset out = dataset;
  out.spec.shift = shift;
  if (shift.kind == ShiftKind::kNone) return out;
  for (Sample& s : out.samples) {
    Rng rng(derive_seed(dataset.spec.sample_seed, {kShiftTag, s.id}));
    for (double& p : s.image.pixels) {
      switch (shift.kind) {
        case ShiftKind::kBrightness:
          p += shift.magnitude;
          break;
        case ShiftKind::kNoise:
          if (shift.magnitude > 0.0) p += rng.normal(0.0, shift.magnitude);
          break;
        case ShiftKind::kInvert:
          p = 1.0 - p;
          break;
        case ShiftKind::kNone:
          break;
      }
      p = std::clamp(p, 0.0, 1.0);
    }
  }
  return out;
}

std::size_t training_pool_size(const Dataset& dataset) { return dataset.spec.samples_per_class / 2; }

namespace {

SplitPlan split_with_base(const Dataset& dataset, std::vector<std::size_t> base,
                          std::vector<std::size_t> novel, std::size_t shots,
                          std::uint64_t split_seed) {
  const std::size_t spc = dataset.spec.samples_per_class;
  const std::size_t pool = training_pool_size(dataset);
  if (shots == 0 || shots > pool) {
    raise(ErrorKind::kInput, kModule,
          "K=" + std::to_string(shots) + " shots outside [1, " + std::to_string(pool) +
              "] (training pool is half of samples_per_class)");
  }
  std::sort(base.begin(), base.end());
  std::sort(novel.begin(), novel.end());
  SplitPlan plan;
  plan.shots = shots;
  plan.base_classes = base;
  plan.new_classes = novel;
  for (std::size_t c : base) {
    std::vector<std::size_t> candidates(pool);
    for (std::size_t i = 0; i < pool; ++i) candidates[i] = c * spc + i;
    Rng rng(derive_seed(split_seed, {kShotTag, dataset.spec.family_id, c}));
    rng.shuffle(candidates);
    candidates.resize(shots);
    std::sort(candidates.begin(), candidates.end());
    plan.train.insert(plan.train.end(), candidates.begin(), candidates.end());
    for (std::size_t i = pool; i < spc; ++i) plan.eval_base.push_back(c * spc + i);
  }
  for (std::size_t c : novel)
    for (std::size_t i = pool; i < spc; ++i) plan.eval_new.push_back(c * spc + i);
  return plan;
}

}  // namespace

SplitPlan make_split(const Dataset& dataset, std::size_t shots, std::uint64_t split_seed) {
  const std::size_t n = dataset.num_classes();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed(dataset.spec.prototypes_seed, {kClassPermutationTag, dataset.spec.family_id}));
  rng.shuffle(perm);
  const std::size_t half = n / 2;
  std::vector<std::size_t> base(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> novel(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
  return split_with_base(dataset, std::move(base), std::move(novel), shots, split_seed);
}

SplitPlan make_full_split(const Dataset& dataset, std::size_t shots, std::uint64_t split_seed) {
  std::vector<std::size_t> all(dataset.num_classes());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return split_with_base(dataset, std::move(all), {}, shots, split_seed);
}

nlohmann::json to_json(const SyntheticDatasetSpec& spec) {
  return {
      {"n_classes", spec.n_classes},
      {"prototypes_seed", spec.prototypes_seed},
      {"sample_seed", spec.sample_seed},
      {"samples_per_class", spec.samples_per_class},
      {"noise_std", spec.noise_std},
      {"family_id", spec.family_id},
      {"image_side", spec.image_side},
      {"channels", spec.channels},
      {"shift", {{"kind", std::string(to_string(spec.shift.kind))}, {"magnitude", spec.shift.magnitude}}},
  };
}

SyntheticDatasetSpec spec_from_json(const nlohmann::json& j) {
  SyntheticDatasetSpec s;
  try {
    s.n_classes = j.at("n_classes").get<std::size_t>();
    s.prototypes_seed = j.at("prototypes_seed").get<std::uint64_t>();
    s.sample_seed = j.at("sample_seed").get<std::uint64_t>();
    s.samples_per_class = j.at("samples_per_class").get<std::size_t>();
    s.noise_std = j.at("noise_std").get<double>();
    s.family_id = j.at("family_id").get<std::size_t>();
    s.image_side = j.at("image_side").get<std::size_t>();
    s.channels = j.at("channels").get<std::size_t>();
    s.shift.kind = parse_shift_kind(j.at("shift").at("kind").get<std::string>());
    s.shift.magnitude = j.at("shift").at("magnitude").get<double>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kInput, kModule, std::string("bad dataset spec: ") + e.what());
  }
  return s;
}

nlohmann::json dataset_manifest(const Dataset& dataset) {
  return {
      {"spec", to_json(dataset.spec)},
      {"class_names", dataset.class_names},
      {"num_samples", dataset.samples.size()},
      {"samples_per_class", dataset.spec.samples_per_class},
      {"pixel_checksum", hex64(dataset.pixel_checksum())},
  };
}

void export_raw(const Dataset& dataset, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) raise(ErrorKind::kIo, kModule, "cannot create " + directory.string());
  std::ofstream pixels(directory / "pixels.f64", std::ios::binary);
  std::ofstream labels(directory / "labels.u32", std::ios::binary);
  if (!pixels || !labels) raise(ErrorKind::kIo, kModule, "cannot write into " + directory.string());
  for (const Sample& s : dataset.samples) {
    for (double p : s.image.pixels) write_le(pixels, p);
    write_le(labels, static_cast<std::uint32_t>(s.label));
  }
  nlohmann::json m = dataset_manifest(dataset);
  m["layout"] = {{"pixels", "pixels.f64"},
                 {"labels", "labels.u32"},
                 {"pixel_order", "sample, y, x, channel"},
                 {"image_side", dataset.spec.image_side},
                 {"channels", dataset.spec.channels}};
  std::ofstream(directory / "manifest.json") << m.dump(2) << '\n';
}

}  // namespace promim
