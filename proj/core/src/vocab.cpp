#include "lesionlab/vocab.hpp"

#include <cctype>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/synth.hpp"

namespace lesionlab {

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.size() < 3 || words_[0] != "<pad>" || words_[1] != "<bos>" || words_[2] != "<eos>") {
    throw ConfigError("vocabulary must start with <pad>, <bos>, <eos>");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<TokenId>(i)).second) {
      throw ConfigError("duplicate vocabulary entry: " + words_[i]);
    }
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab = [] {
    std::vector<std::string> words{"<pad>", "<bos>", "<eos>"};
    auto add = [&](const std::string& w) {
      for (const auto& existing : words)
        if (existing == w) return;
      words.push_back(w);
    };
    const Lexicon& lex = lexicon();
    for (const auto& d : lex.shared_determiners) add(d);
    for (const auto& d : lex.singular_determiners) add(d);
    for (const auto& d : lex.plural_determiners) add(d);
    for (const auto& n : lex.nouns) {
      add(n.singular);
      add(n.plural);
    }
    for (const auto& v : lex.verbs) {
      add(v.base);
      add(v.third);
      add(v.ing);
    }
    for (const auto& a : lex.adjectives) add(a);
    for (const char* w : {"himself", "herself", "itself", "themselves", "is", "are", "does", "do", "ever", "and",
                          "too", "there", "who", "what", "?", ":", "=", "repeat", "name", "tell"}) {
      add(w);
    }
    for (const auto& [target, definition] : lex.definitions) {
      add(target);
      for (const auto& w : split_words(definition)) add(w);
    }
    for (const char* w : {"how", "you", "today", "i", "am", "fine", "thank"}) add(w);
    for (const auto& w : lex.neologisms) add(w);
    return Vocabulary(std::move(words));
  }();
  return vocab;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw InputError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(words_.size()));
  }
  return words_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view word) const {
  if (auto found = find(word)) return *found;
  throw InputError("out-of-vocabulary word: '" + std::string(word) + "'");
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const { return encode(split_words(text)); }

std::vector<TokenId> Vocabulary::encode(const Sentence& words) const {
  std::vector<TokenId> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<TokenId> Vocabulary::encode_sequence(const Sentence& words) const {
  std::vector<TokenId> out{bos()};
  for (const auto& w : words) out.push_back(id(w));
  out.push_back(eos());
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId t : ids) {
    if (is_special(t)) continue;
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

std::uint64_t Vocabulary::fingerprint() const {
  Fingerprint fp;
  for (const auto& w : words_) fp.text(w);
  return fp.value();
}

Sentence split_words(std::string_view text) {
  Sentence out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_words(const Sentence& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace lesionlab
