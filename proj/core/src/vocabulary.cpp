#include "promim/vocabulary.hpp"

#include <array>
#include <sstream>

#include "promim/error.hpp"

namespace promim {

namespace {

constexpr std::array<std::string_view, 56> kClassNames = {
    "dog",    "cat",    "bird",   "fish",   "horse",  "sheep",  "cow",    "bear",
    "apple",  "banana", "cherry", "grape",  "lemon",  "mango",  "peach",  "pear",
    "car",    "truck",  "bus",    "train",  "plane",  "boat",   "bike",   "tram",
    "rose",   "tulip",  "daisy",  "lily",   "orchid", "lotus",  "iris",   "poppy",
    "chair",  "table",  "lamp",   "sofa",   "desk",   "bed",    "shelf",  "clock",
    "hill",   "lake",   "river",  "beach",  "forest", "desert", "canyon", "island",
    "violin", "piano",  "guitar", "drum",   "flute",  "harp",   "cello",  "horn",
};

constexpr std::array<std::string_view, 7> kTemplateWords = {"a",       "an",    "the", "photo",
                                                            "picture", "image", "of"};

constexpr std::array<std::string_view, 4> kCaptionTemplates = {
    "a photo of a [CLS]",
    "a picture of a [CLS]",
    "an image of the [CLS]",
    "a photo of the [CLS]",
};

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty() || words_[i].find_first_of(" \t\n") != std::string::npos) {
      raise(ErrorKind::kInput, "encoders", "vocabulary entries must be single non-empty words");
    }
    if (!index_.emplace(words_[i], static_cast<TokenId>(i)).second) {
      raise(ErrorKind::kInput, "encoders", "duplicate vocabulary entry '" + words_[i] + "'");
    }
  }
  if (!contains(kEndOfText)) {
    raise(ErrorKind::kInput, "encoders", "vocabulary lacks the end-of-text token");
  }
}

std::shared_ptr<const Vocabulary> Vocabulary::standard() {
  static const std::shared_ptr<const Vocabulary> vocab = [] {
    std::vector<std::string> words;
    words.emplace_back(kEndOfText);
    for (auto w : kTemplateWords) words.emplace_back(w);
    for (auto w : kClassNames) words.emplace_back(w);
    return std::make_shared<const Vocabulary>(std::move(words));
  }();
  return vocab;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.find(std::string(word)) != index_.end();
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) {
    raise(ErrorKind::kInput, "encoders", "unknown word '" + std::string(word) + "'");
  }
  return it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id >= words_.size()) {
    raise(ErrorKind::kInput, "encoders", "token id " + std::to_string(id) + " out of vocabulary");
  }
  return words_[id];
}

TokenId Vocabulary::end_token() const { return id(kEndOfText); }

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) out.push_back(id(w));
  return out;
}

std::span<const std::string_view> standard_class_names() { return kClassNames; }

std::span<const std::string_view> caption_templates() { return kCaptionTemplates; }

std::vector<TokenId> fill_template(const Vocabulary& vocab, std::string_view templ,
                                   std::string_view class_name) {
  if (!vocab.contains(class_name) || class_name == kEndOfText) {
    raise(ErrorKind::kInput, "encoders", "unknown class name '" + std::string(class_name) + "'");
  }
  std::string text(templ);
  const auto pos = text.find(kClassPlaceholder);
  if (pos == std::string::npos) {
    raise(ErrorKind::kInput, "encoders", "template lacks a [CLS] slot: " + std::string(templ));
  }
  text.replace(pos, kClassPlaceholder.size(), class_name);
  return vocab.tokenize(text);
}

std::vector<TokenId> embed_template(const Vocabulary& vocab, std::string_view class_name) {
  return fill_template(vocab, kPromptTemplate, class_name);
}

}  // namespace promim
