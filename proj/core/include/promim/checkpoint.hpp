#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "promim/encoders.hpp"
#include "promim/training.hpp"

namespace promim {

inline constexpr int kCheckpointVersion = 1;

/// Versioned JSON snapshot of the encoder: config, vocabulary, and every
/// parameter with its shape. Doubles round-trip exactly.
nlohmann::json encoder_to_json(const DualEncoder& encoder);
/// Rejects unknown versions and any mismatch between the stored and the
/// expected parameter shape table. The result is frozen.
DualEncoder encoder_from_json(const nlohmann::json& j);

nlohmann::json prompt_to_json(const PromptLearner& learner, std::uint64_t encoder_checksum);
/// `encoder` supplies the expected shapes; a checkpoint written against a
/// different encoder is rejected.
PromptLearner prompt_from_json(const nlohmann::json& j, const DualEncoder& encoder);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

void save_encoder(const DualEncoder& encoder, const std::filesystem::path& path);
DualEncoder load_encoder(const std::filesystem::path& path);

}  // namespace promim
