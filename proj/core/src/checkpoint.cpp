#include "promim/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "promim/error.hpp"

namespace promim {
namespace {

constexpr std::string_view kModule = "checkpoint";
constexpr std::string_view kEncoderFormat = "promim-encoder";
constexpr std::string_view kPromptFormat = "promim-prompt";

nlohmann::json tensor_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", t.to_vector()}};
}

void load_tensor(const nlohmann::json& j, const std::string& name, Tensor& target) {
  Shape shape;
  std::vector<double> data;
  try {
    shape = j.at("shape").get<Shape>();
    data = j.at("data").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kIo, kModule, "malformed tensor '" + name + "': " + e.what());
  }
  if (shape != target.shape()) {
    raise(ErrorKind::kDimension, kModule,
          "parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
              shape_string(target.shape()));
  }
  if (data.size() != target.numel()) {
    raise(ErrorKind::kIo, kModule, "parameter '" + name + "' has the wrong number of values");
  }
  auto dst = target.mutable_data();
  std::copy(data.begin(), data.end(), dst.begin());
}

void check_header(const nlohmann::json& j, std::string_view format) {
  if (!j.is_object() || j.value("format", std::string()) != format) {
    raise(ErrorKind::kIo, kModule, "not a " + std::string(format) + " checkpoint");
  }
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion) {
    raise(ErrorKind::kIo, kModule, "unsupported checkpoint version " + std::to_string(version));
  }
}

nlohmann::json config_json(const EncoderConfig& c) {
  return {{"image_side", c.image_side},   {"channels", c.channels},
          {"patch_size", c.patch_size},   {"embed_dim", c.embed_dim},
          {"depth", c.depth},             {"heads", c.heads},
          {"mlp_ratio", c.mlp_ratio},     {"text_vocab_size", c.text_vocab_size},
          {"max_text_len", c.max_text_len}, {"output_dim", c.output_dim}};
}

EncoderConfig config_from(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.image_side = j.at("image_side");
    c.channels = j.at("channels");
    c.patch_size = j.at("patch_size");
    c.embed_dim = j.at("embed_dim");
    c.depth = j.at("depth");
    c.heads = j.at("heads");
    c.mlp_ratio = j.at("mlp_ratio");
    c.text_vocab_size = j.at("text_vocab_size");
    c.max_text_len = j.at("max_text_len");
    c.output_dim = j.at("output_dim");
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kIo, kModule, std::string("malformed encoder config: ") + e.what());
  }
  return c;
}

void load_named(const nlohmann::json& stored, const std::vector<NamedTensor>& expected) {
  if (!stored.is_object() || stored.size() != expected.size()) {
    raise(ErrorKind::kDimension, kModule,
          "checkpoint holds " + std::to_string(stored.size()) + " parameters, expected " +
              std::to_string(expected.size()));
  }
  for (const NamedTensor& p : expected) {
    if (!stored.contains(p.name)) {
      raise(ErrorKind::kDimension, kModule, "missing parameter '" + p.name + "'");
    }
    Tensor t = p.tensor;
    load_tensor(stored.at(p.name), p.name, t);
  }
}

std::vector<NamedTensor> learner_named(const PromptLearner& learner) {
  std::vector<NamedTensor> out{{"context", learner.context.vectors}};
  if (learner.meta) {
    out.push_back({"meta.w1", learner.meta->w1});
    out.push_back({"meta.b1", learner.meta->b1});
    out.push_back({"meta.w2", learner.meta->w2});
    out.push_back({"meta.b2", learner.meta->b2});
  }
  return out;
}

}  // namespace

nlohmann::json encoder_to_json(const DualEncoder& encoder) {
  nlohmann::json params = nlohmann::json::object();
  for (const NamedTensor& p : encoder.parameters()) params[p.name] = tensor_json(p.tensor);
  return {{"format", kEncoderFormat},
          {"version", kCheckpointVersion},
          {"config", config_json(encoder.config())},
          {"vocabulary", encoder.vocabulary().words()},
          {"checksum", hex_checksum(encoder.checksum())},
          {"parameters", params}};
}

DualEncoder encoder_from_json(const nlohmann::json& j) {
  check_header(j, kEncoderFormat);
  const EncoderConfig config = config_from(j.at("config"));
  std::shared_ptr<const Vocabulary> vocab;
  try {
    vocab = std::make_shared<const Vocabulary>(j.at("vocabulary").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kIo, kModule, std::string("malformed vocabulary: ") + e.what());
  }
  DualEncoder encoder = DualEncoder::initialize(config, 0, vocab);
  load_named(j.at("parameters"), encoder.parameters());
  encoder.freeze();
  if (j.contains("checksum") && j.at("checksum") != hex_checksum(encoder.checksum())) {
    raise(ErrorKind::kIo, kModule, "encoder checksum mismatch");
  }
  return encoder;
}

nlohmann::json prompt_to_json(const PromptLearner& learner, std::uint64_t encoder_checksum) {
  nlohmann::json params = nlohmann::json::object();
  for (const NamedTensor& p : learner_named(learner)) params[p.name] = tensor_json(p.tensor);
  return {{"format", kPromptFormat},
          {"version", kCheckpointVersion},
          {"method", std::string(to_string(learner.method))},
          {"context_length", learner.context.count()},
          {"meta_reduction", learner.meta ? learner.meta->reduction : 0},
          {"encoder_checksum", hex_checksum(encoder_checksum)},
          {"parameters", params}};
}

PromptLearner prompt_from_json(const nlohmann::json& j, const DualEncoder& encoder) {
  check_header(j, kPromptFormat);
  if (j.value("encoder_checksum", std::string()) != hex_checksum(encoder.checksum())) {
    raise(ErrorKind::kIo, kModule, "prompt checkpoint was trained against a different encoder");
  }
  const TuneMethod method = parse_tune_method(j.value("method", std::string()));
  const std::size_t m = j.value("context_length", std::size_t{0});
  std::size_t reduction = j.value("meta_reduction", std::size_t{0});
  if (reduction == 0) reduction = kDefaultMetaReduction;
  PromptLearner learner = PromptLearner::initialize(method, encoder.config(), m, reduction, 0);
  load_named(j.at("parameters"), learner_named(learner));
  return learner;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, kModule, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorKind::kIo, kModule, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::kIo, kModule, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorKind::kIo, kModule, "write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void save_encoder(const DualEncoder& encoder, const std::filesystem::path& path) {
  write_json_file(path, encoder_to_json(encoder));
}

DualEncoder load_encoder(const std::filesystem::path& path) {
  return encoder_from_json(read_json_file(path));
}

}  // namespace promim
