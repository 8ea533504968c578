#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lesionlab/rng.hpp"
#include "lesionlab/vocab.hpp"

namespace lesionlab {

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

enum class NounField { male, female, creature, food, object };

struct NounEntry {
  std::string singular;
  std::string plural;
  NounField field;
};

struct VerbEntry {
  std::string base;
  std::string third;  // 3rd person singular
  std::string ing;
  bool transitive;
  bool edible_object;
};

struct Lexicon {
  std::vector<NounEntry> nouns;
  std::vector<VerbEntry> verbs;
  std::vector<std::string> adjectives;
  std::vector<std::string> singular_determiners;
  std::vector<std::string> plural_determiners;
  std::vector<std::string> shared_determiners;
  std::vector<std::string> neologisms;
  /// (target noun, definition) pairs used by naming items.
  std::vector<std::pair<std::string, std::string>> definitions;
};

const Lexicon& lexicon();

bool is_function_word(std::string_view word);
bool is_content_word(std::string_view word);
/// Finite verbs, participles and auxiliaries.
bool is_verb_class(std::string_view word);

// ---------------------------------------------------------------------------
// Grammar corpus
// ---------------------------------------------------------------------------

/// Plain sentences sampled from the fixed probabilistic grammar.
std::vector<Sentence> build_grammar_corpus(std::uint64_t seed, std::size_t count);

/// Pre-training mix: plain sentences plus the task formats used by the
/// clinical item bank (repeat / name / comprehension / tell / greeting).
std::vector<Sentence> build_training_corpus(std::uint64_t seed, std::size_t count);

/// Recognizer for the source grammar (plain sentences only).
bool parses(const Sentence& words);

// ---------------------------------------------------------------------------
// Minimal pairs
// ---------------------------------------------------------------------------

enum class Phenomenon {
  agreement,
  argument_structure,
  binding,
  npi_licensing,
  quantifiers,
  ellipsis,
  filler_gap,
  s_selection,
};

std::span<const Phenomenon> all_phenomena();
std::string_view phenomenon_name(Phenomenon p);
Phenomenon phenomenon_from_name(std::string_view name);
/// Syntactic vs semantic grouping used by the summary columns.
bool is_syntactic(Phenomenon p);

struct MinimalPair {
  Sentence good;
  Sentence bad;
  Phenomenon phenomenon;
};

using PairSuites = std::map<Phenomenon, std::vector<MinimalPair>>;

PairSuites build_minimal_pairs(std::uint64_t seed, std::size_t per_phenomenon);
MinimalPair make_minimal_pair(Phenomenon p, Rng& rng);

// ---------------------------------------------------------------------------
// Subtype corpora
// ---------------------------------------------------------------------------

enum class Phenotype { broca, wernicke };
std::string_view phenotype_name(Phenotype p);
Phenotype phenotype_from_name(std::string_view name);

struct SubtypeCorpus {
  Phenotype phenotype;
  std::vector<Sentence> utterances;
  std::uint64_t seed;
};

struct BrocaStyle {
  double function_word_drop = 0.9;
  double inflection_strip = 0.6;
  double adjective_drop = 0.6;
  std::size_t max_tokens = 3;
};

struct WernickeStyle {
  double substitution = 0.6;
  double neologism = 0.25;
};

/// Agrammatic reduction: function words and inflections dropped, shortened.
Sentence broca_transform(const Sentence& base, Rng& rng, const BrocaStyle& style = {});
/// Length-preserving semantic scrambling with neologisms.
Sentence wernicke_transform(const Sentence& base, Rng& rng, const WernickeStyle& style = {});

/// Sentences the subtype corpora are derived from.
std::vector<Sentence> build_narrative_sentences(std::uint64_t seed, std::size_t count);

std::pair<SubtypeCorpus, SubtypeCorpus> build_subtype_corpora(std::uint64_t seed, std::size_t broca_count,
                                                               std::size_t wernicke_count);

// ---------------------------------------------------------------------------
// Clinical item bank
// ---------------------------------------------------------------------------

enum class Subtest { SS, C, R, N };
std::string_view subtest_name(Subtest s);
Subtest subtest_from_name(std::string_view name);

enum class Rubric { keyword_fluency, multiple_choice, edit_similarity, key_token };
std::string_view rubric_name(Rubric r);
Rubric rubric_from_name(std::string_view name);
Rubric rubric_for(Subtest s);

struct RepetitionKey {
  std::string target;
};
struct NamingKey {
  std::string target;
};
struct ChoiceKey {
  std::vector<std::string> options;
  std::size_t answer = 0;
};
struct SpeechKey {
  std::vector<std::string> keywords;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 10;
};
using ItemKey = std::variant<RepetitionKey, NamingKey, ChoiceKey, SpeechKey>;

struct ClinicalItem {
  std::string id;
  Subtest subtest;
  std::string prompt;
  ItemKey key;
  double max_points;
  Rubric rubric;
};

struct ItemBank {
  std::string version;
  std::vector<ClinicalItem> items;
};

inline constexpr std::string_view kItemBankVersion = "wab-text-analog/1";

ItemBank build_clinical_items(std::uint64_t seed);

/// Throws DataError when the rubric payload does not fit the rubric.
void validate_item(const ClinicalItem& item);

std::string item_bank_to_json(const ItemBank& bank);
ItemBank item_bank_from_json(std::string_view text);

}  // namespace lesionlab
