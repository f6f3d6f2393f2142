#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace promim {

using TokenId = std::uint32_t;

/// Closed word-level vocabulary with whitespace tokenization.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> words);

  /// The built-in vocabulary: end-of-text marker, template words and the
  /// class nouns used by the synthetic datasets (64 entries).
  static std::shared_ptr<const Vocabulary> standard();

  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  TokenId id(std::string_view word) const;
  const std::string& word(TokenId id) const;
  const std::vector<std::string>& words() const { return words_; }
  TokenId end_token() const;

  std::vector<TokenId> tokenize(std::string_view text) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

inline constexpr std::string_view kEndOfText = "<eot>";
inline constexpr std::string_view kClassPlaceholder = "[CLS]";
/// The hand-crafted zero-shot prompt.
inline constexpr std::string_view kPromptTemplate = "a photo of a [CLS]";

/// Nouns available as class names, in the order datasets consume them.
std::span<const std::string_view> standard_class_names();

/// Caption templates used for contrastive pretraining. All have four words
/// before the class slot so they line up with four context tokens.
std::span<const std::string_view> caption_templates();

/// Fills the class slot of a template and tokenizes the result.
std::vector<TokenId> fill_template(const Vocabulary& vocab, std::string_view templ,
                                   std::string_view class_name);

/// Tokens of "a photo of a [CLS]" for the given class.
std::vector<TokenId> embed_template(const Vocabulary& vocab, std::string_view class_name);

}  // namespace promim
