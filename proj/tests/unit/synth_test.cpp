#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "lesionlab/errors.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/rng.hpp"
#include "lesionlab/synth.hpp"
#include "lesionlab/vocab.hpp"

namespace lesionlab {
namespace {

double mean_length(const std::vector<Sentence>& s) {
  double total = 0.0;
  for (const auto& x : s) total += static_cast<double>(x.size());
  return total / static_cast<double>(s.size());
}

TEST(Grammar, SameSeedSameCorpus) {
  EXPECT_EQ(build_grammar_corpus(5, 2), build_grammar_corpus(5, 2));
  EXPECT_EQ(build_training_corpus(5, 50), build_training_corpus(5, 50));
  EXPECT_NE(build_grammar_corpus(5, 20), build_grammar_corpus(6, 20));
}

TEST(Grammar, EverySentenceParses) {
  for (const auto& s : build_grammar_corpus(3, 2000)) EXPECT_TRUE(parses(s)) << join_words(s);
}

TEST(Grammar, EveryWordIsInTheVocabulary) {
  const Vocabulary& v = Vocabulary::standard();
  for (const auto& s : build_training_corpus(8, 3000))
    for (const auto& w : s) ASSERT_TRUE(v.find(w).has_value()) << w;
}

TEST(Grammar, TypeTokenCurve) {
  // Recorded from seed 42; the closed lexicon saturates within 1k sentences.
  const auto corpus = build_grammar_corpus(42, 10000);
  std::set<std::string> types;
  std::size_t tokens = 0;
  std::vector<std::array<std::size_t, 3>> curve;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& w : corpus[i]) {
      types.insert(w);
      ++tokens;
    }
    if (i + 1 == 100 || i + 1 == 1000 || i + 1 == 10000) curve.push_back({i + 1, tokens, types.size()});
  }
  const std::vector<std::array<std::size_t, 3>> expected{{100, 500, 94}, {1000, 5234, 113}, {10000, 51948, 113}};
  EXPECT_EQ(curve, expected);
}

TEST(MinimalPairs, AgreementPairDiffersOnlyInVerbNumber) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const MinimalPair p = make_minimal_pair(Phenomenon::agreement, rng);
    ASSERT_EQ(p.good.size(), p.bad.size());
    std::size_t diffs = 0;
    for (std::size_t k = 0; k < p.good.size(); ++k) {
      if (p.good[k] == p.bad[k]) continue;
      ++diffs;
      const std::set<std::pair<std::string, std::string>> auxiliaries{{"is", "are"}, {"are", "is"}};
      const bool singular_good = p.good[k].back() == 's' && p.good[k].substr(0, p.good[k].size() - 1) == p.bad[k];
      const bool plural_good = p.bad[k].back() == 's' && p.bad[k].substr(0, p.bad[k].size() - 1) == p.good[k];
      EXPECT_TRUE(singular_good || plural_good || auxiliaries.contains({p.good[k], p.bad[k]}))
          << join_words(p.good) << " / " << join_words(p.bad);
    }
    EXPECT_EQ(diffs, 1u);
  }
}

TEST(MinimalPairs, ArgumentStructureAddsOrRemovesAnObject) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const MinimalPair p = make_minimal_pair(Phenomenon::argument_structure, rng);
    const auto& shorter = p.good.size() < p.bad.size() ? p.good : p.bad;
    const auto& longer = p.good.size() < p.bad.size() ? p.bad : p.good;
    ASSERT_LT(shorter.size(), longer.size());
    EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), longer.begin()));
  }
}

TEST(MinimalPairs, GoodParsesBadDoesNot) {
  const auto suites = build_minimal_pairs(7, 50);
  ASSERT_EQ(suites.size(), all_phenomena().size());
  for (const auto& [phenomenon, pairs] : suites) {
    ASSERT_EQ(pairs.size(), 50u);
    for (const auto& p : pairs) {
      EXPECT_TRUE(parses(p.good)) << phenomenon_name(phenomenon) << ": " << join_words(p.good);
      EXPECT_FALSE(parses(p.bad)) << phenomenon_name(phenomenon) << ": " << join_words(p.bad);
    }
  }
}

TEST(Subtypes, BrocaExample) {
  Rng rng(0);
  BrocaStyle strict;
  strict.function_word_drop = 1.0;
  EXPECT_EQ(join_words(broca_transform(split_words("the boy is eating the apple"), rng, strict)), "boy eating apple");
}

TEST(Subtypes, WernickeKeepsFrameAndScramblesContent) {
  Rng rng(0);
  WernickeStyle always{1.0, 0.0};
  const Sentence base = split_words("the boy is eating the apple");
  const Sentence out = wernicke_transform(base, rng, always);
  ASSERT_EQ(out.size(), base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (is_function_word(base[i])) EXPECT_EQ(out[i], base[i]);
    else EXPECT_NE(out[i], base[i]);
  }
}

TEST(Subtypes, UtteranceLengths) {
  const auto base = build_narrative_sentences(11, 2000);
  Rng rng(12);
  std::vector<Sentence> broca, wernicke;
  for (const auto& s : base) {
    broca.push_back(broca_transform(s, rng));
    wernicke.push_back(wernicke_transform(s, rng));
  }
  EXPECT_LT(mean_length(broca), 0.6 * mean_length(base));
  EXPECT_NEAR(mean_length(wernicke) / mean_length(base), 1.0, 0.1);
}

TEST(Subtypes, CorporaHaveRequestedSizes) {
  const auto [b, w] = build_subtype_corpora(4, 939, 189);
  EXPECT_EQ(b.utterances.size(), 939u);
  EXPECT_EQ(w.utterances.size(), 189u);
  EXPECT_EQ(b.phenotype, Phenotype::broca);
  EXPECT_EQ(w.phenotype, Phenotype::wernicke);
}

TEST(ItemBank, RepetitionItemKeysItsSentence) {
  const ItemBank bank = build_clinical_items(42);
  for (const auto& item : bank.items) {
    if (item.subtest != Subtest::R) continue;
    const auto& key = std::get<RepetitionKey>(item.key);
    EXPECT_EQ(item.prompt, "repeat : " + key.target + " =");
    EXPECT_EQ(item.rubric, Rubric::edit_similarity);
  }
}

TEST(ItemBank, ChoiceItemsHaveFourOptionsOneKeyed) {
  for (const auto& item : build_clinical_items(42).items) {
    if (item.subtest != Subtest::C) continue;
    const auto& key = std::get<ChoiceKey>(item.key);
    EXPECT_EQ(key.options.size(), 4u);
    EXPECT_LT(key.answer, 4u);
    EXPECT_EQ(std::set<std::string>(key.options.begin(), key.options.end()).size(), 4u) << item.id;
  }
}

TEST(ItemBank, TwentyFourValidItemsPerSubtest) {
  const ItemBank bank = build_clinical_items(42);
  std::map<Subtest, int> count;
  std::set<std::string> ids;
  for (const auto& item : bank.items) {
    validate_item(item);
    count[item.subtest] += 1;
    ids.insert(item.id);
  }
  for (auto s : {Subtest::SS, Subtest::C, Subtest::R, Subtest::N}) EXPECT_EQ(count[s], 24);
  EXPECT_EQ(ids.size(), bank.items.size());
}

TEST(ItemBank, JsonRoundTrip) {
  const ItemBank bank = build_clinical_items(42);
  const std::string text = item_bank_to_json(bank);
  EXPECT_EQ(item_bank_to_json(item_bank_from_json(text)), text);
  EXPECT_THROW(item_bank_from_json("{\"items\": 3}"), DataError);
}

TEST(ItemBank, BundledFileMatchesGenerator) {
  EXPECT_EQ(read_file(LESIONLAB_SOURCE_DIR "/data/wab_items.json"), item_bank_to_json(build_clinical_items(42)));
}

TEST(ItemBank, MismatchedRubricPayloadIsRejected) {
  ClinicalItem item = build_clinical_items(42).items.front();
  item.key = ChoiceKey{{"a", "b"}, 5};
  EXPECT_THROW(validate_item(item), DataError);
}

}  // namespace
}  // namespace lesionlab
