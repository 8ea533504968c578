#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lesionlab {

using TokenId = int;
using Sentence = std::vector<std::string>;

/// Word-level closed vocabulary. Ids 0..2 are <pad>, <bos>, <eos>.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> words);

  /// The lexicon shared by every generator, model and item bank.
  static const Vocabulary& standard();

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(TokenId id) const;
  std::optional<TokenId> find(std::string_view word) const;
  /// Throws InputError for out-of-vocabulary words.
  TokenId id(std::string_view word) const;

  TokenId pad() const noexcept { return 0; }
  TokenId bos() const noexcept { return 1; }
  TokenId eos() const noexcept { return 2; }
  bool is_special(TokenId id) const noexcept { return id >= 0 && id <= 2; }

  /// Whitespace split, no specials added.
  std::vector<TokenId> encode(std::string_view text) const;
  std::vector<TokenId> encode(const Sentence& words) const;
  /// <bos> words <eos>
  std::vector<TokenId> encode_sequence(const Sentence& words) const;
  /// Space-joined words with specials dropped.
  std::string decode(std::span<const TokenId> ids) const;

  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

Sentence split_words(std::string_view text);
std::string join_words(const Sentence& words);

}  // namespace lesionlab
