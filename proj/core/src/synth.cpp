#include "lesionlab/synth.hpp"

#include <algorithm>
#include <array>
#include <optional>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"

namespace lesionlab {

const Lexicon& lexicon() {
  static const Lexicon lex = [] {
    Lexicon l;
    l.nouns = {
        {"boy", "boys", NounField::male},       {"man", "men", NounField::male},
        {"king", "kings", NounField::male},     {"girl", "girls", NounField::female},
        {"woman", "women", NounField::female},  {"queen", "queens", NounField::female},
        {"dog", "dogs", NounField::creature},   {"cat", "cats", NounField::creature},
        {"bird", "birds", NounField::creature}, {"horse", "horses", NounField::creature},
        {"apple", "apples", NounField::food},   {"cake", "cakes", NounField::food},
        {"egg", "eggs", NounField::food},       {"pie", "pies", NounField::food},
        {"ball", "balls", NounField::object},   {"book", "books", NounField::object},
        {"car", "cars", NounField::object},     {"chair", "chairs", NounField::object},
        {"brick", "bricks", NounField::object}, {"cup", "cups", NounField::object},
        {"door", "doors", NounField::object},   {"box", "boxes", NounField::object},
        {"cow", "cows", NounField::creature},   {"pear", "pears", NounField::food},
    };
    l.verbs = {
        {"run", "runs", "running", false, false},     {"sleep", "sleeps", "sleeping", false, false},
        {"laugh", "laughs", "laughing", false, false}, {"sing", "sings", "singing", false, false},
        {"walk", "walks", "walking", false, false},   {"smile", "smiles", "smiling", false, false},
        {"see", "sees", "seeing", true, false},       {"like", "likes", "liking", true, false},
        {"find", "finds", "finding", true, false},    {"hold", "holds", "holding", true, false},
        {"chase", "chases", "chasing", true, false},  {"eat", "eats", "eating", true, true},
    };
    l.adjectives = {"big", "small", "red", "old", "happy", "new"};
    l.shared_determiners = {"the", "no"};
    l.singular_determiners = {"a", "every", "this"};
    l.plural_determiners = {"these", "many", "some"};
    l.neologisms = {"blick", "dax", "wug", "fendle", "zorp", "tove", "snib", "plim", "glorp", "mome"};
    l.definitions = {
        {"dog", "animal that barks"},   {"cat", "animal that meows"},  {"bird", "animal that flies"},
        {"horse", "animal that neighs"}, {"king", "man that rules"},   {"queen", "woman that rules"},
        {"apple", "red fruit"},         {"cake", "sweet food"},        {"ball", "round toy"},
        {"book", "thing you read"},     {"car", "thing you drive"},    {"chair", "thing you sit on"},
        {"boy", "young male child"},    {"man", "grown male person"},  {"girl", "young female child"},
        {"woman", "grown female person"}, {"egg", "food from a hen"},  {"pie", "baked food with crust"},
        {"brick", "block for walls"},   {"cup", "thing you drink from"}, {"door", "thing you open"},
        {"box", "thing you pack"},      {"cow", "animal that moos"},   {"pear", "green fruit"},
    };
    return l;
  }();
  return lex;
}

namespace {

constexpr std::array kAuxiliaries{"is", "are", "does", "do"};
constexpr std::array kReflexives{"himself", "herself", "itself", "themselves"};
constexpr std::array kOtherFunction{"ever", "and", "too", "there", "who", "what"};

bool contains(const auto& list, std::string_view w) {
  return std::find(std::begin(list), std::end(list), w) != std::end(list);
}

bool is_determiner(std::string_view w) {
  const Lexicon& l = lexicon();
  return contains(l.shared_determiners, w) || contains(l.singular_determiners, w) ||
         contains(l.plural_determiners, w);
}

struct NounRef {
  const NounEntry* entry;
  bool plural;
};

std::optional<NounRef> lookup_noun(std::string_view w) {
  for (const auto& n : lexicon().nouns) {
    if (n.singular == w) return NounRef{&n, false};
    if (n.plural == w) return NounRef{&n, true};
  }
  return std::nullopt;
}

enum class VerbForm { base, third, ing };
struct VerbRef {
  const VerbEntry* entry;
  VerbForm form;
};

std::optional<VerbRef> lookup_verb(std::string_view w) {
  for (const auto& v : lexicon().verbs) {
    if (v.base == w) return VerbRef{&v, VerbForm::base};
    if (v.third == w) return VerbRef{&v, VerbForm::third};
    if (v.ing == w) return VerbRef{&v, VerbForm::ing};
  }
  return std::nullopt;
}

const std::string& verb_form(const VerbEntry& v, VerbForm f) {
  switch (f) {
    case VerbForm::base: return v.base;
    case VerbForm::third: return v.third;
    case VerbForm::ing: return v.ing;
  }
  return v.base;
}

bool animate(NounField f) { return f == NounField::male || f == NounField::female || f == NounField::creature; }

std::string reflexive_for(NounField f, bool plural) {
  if (plural) return "themselves";
  switch (f) {
    case NounField::male: return "himself";
    case NounField::female: return "herself";
    default: return "itself";
  }
}

// ---------------------------------------------------------------------------
// Generation helpers
// ---------------------------------------------------------------------------

template <typename Pred>
const NounEntry& pick_noun(Rng& rng, Pred pred) {
  std::vector<const NounEntry*> pool;
  for (const auto& n : lexicon().nouns)
    if (pred(n.field)) pool.push_back(&n);
  return *pool[rng.below(pool.size())];
}

const VerbEntry& pick_verb(Rng& rng, bool transitive, bool allow_eat = true) {
  std::vector<const VerbEntry*> pool;
  for (const auto& v : lexicon().verbs)
    if (v.transitive == transitive && (allow_eat || !v.edible_object)) pool.push_back(&v);
  return *pool[rng.below(pool.size())];
}

std::string pick_determiner(Rng& rng, bool plural, bool allow_no = true) {
  const Lexicon& l = lexicon();
  std::vector<std::string> pool = plural ? l.plural_determiners : l.singular_determiners;
  pool.push_back("the");
  if (allow_no && rng.bernoulli(0.3)) pool.push_back("no");
  return pool[rng.below(pool.size())];
}

struct NP {
  Sentence words;
  const NounEntry* noun;
  bool plural;
};

NP make_np(Rng& rng, const NounEntry& noun, bool plural, std::string det, double adj_rate = 0.25) {
  NP np{{std::move(det)}, &noun, plural};
  if (rng.bernoulli(adj_rate)) np.words.push_back(rng.pick(lexicon().adjectives));
  np.words.push_back(plural ? noun.plural : noun.singular);
  return np;
}

template <typename Pred>
NP random_np(Rng& rng, Pred pred, double adj_rate = 0.25, bool allow_no = false) {
  const NounEntry& noun = pick_noun(rng, pred);
  const bool plural = rng.bernoulli(0.4);
  return make_np(rng, noun, plural, pick_determiner(rng, plural, allow_no), adj_rate);
}

void append(Sentence& s, const Sentence& t) { s.insert(s.end(), t.begin(), t.end()); }

const std::string& agree(const VerbEntry& v, bool plural) { return plural ? v.base : v.third; }

NP object_for(Rng& rng, const VerbEntry& v) {
  if (v.edible_object) return random_np(rng, [](NounField f) { return f == NounField::food; });
  return random_np(rng, [](NounField) { return true; });
}

// Each builder returns the sentence and, where useful, the index of the
// token that a corruption rule targets.
struct Built {
  Sentence words;
  std::size_t focus = 0;
  NP subject{};
  std::optional<NP> object;
  const VerbEntry* verb = nullptr;
};

Built build_intransitive(Rng& rng, std::optional<NP> subject = std::nullopt) {
  Built b;
  b.subject = subject ? *subject : random_np(rng, animate, 0.25, true);
  b.verb = &pick_verb(rng, false);
  b.words = b.subject.words;
  b.focus = b.words.size();
  b.words.push_back(agree(*b.verb, b.subject.plural));
  return b;
}

Built build_transitive(Rng& rng, std::optional<NP> subject = std::nullopt, bool allow_eat = true) {
  Built b;
  b.subject = subject ? *subject : random_np(rng, animate, 0.25, true);
  b.verb = &pick_verb(rng, true, allow_eat);
  b.words = b.subject.words;
  b.focus = b.words.size();
  b.words.push_back(agree(*b.verb, b.subject.plural));
  b.object = object_for(rng, *b.verb);
  append(b.words, b.object->words);
  return b;
}

Built build_progressive(Rng& rng) {
  Built b;
  b.subject = random_np(rng, animate, 0.25, true);
  b.verb = &pick_verb(rng, rng.bernoulli(0.5));
  b.words = b.subject.words;
  b.focus = b.words.size();
  b.words.push_back(b.subject.plural ? "are" : "is");
  b.words.push_back(b.verb->ing);
  if (b.verb->transitive) {
    b.object = object_for(rng, *b.verb);
    append(b.words, b.object->words);
  }
  return b;
}

Built build_reflexive(Rng& rng) {
  Built b;
  b.subject = random_np(rng, animate, 0.25, true);
  b.verb = &pick_verb(rng, true, false);
  b.words = b.subject.words;
  b.words.push_back(agree(*b.verb, b.subject.plural));
  b.focus = b.words.size();
  b.words.push_back(reflexive_for(b.subject.noun->field, b.subject.plural));
  return b;
}

Built build_npi(Rng& rng) {
  Built b;
  const NounEntry& noun = pick_noun(rng, animate);
  const bool plural = rng.bernoulli(0.4);
  b.subject = make_np(rng, noun, plural, "no");
  b.words = b.subject.words;
  b.focus = 0;
  b.words.push_back("ever");
  b.verb = &pick_verb(rng, rng.bernoulli(0.5));
  b.words.push_back(agree(*b.verb, plural));
  if (b.verb->transitive) {
    b.object = object_for(rng, *b.verb);
    append(b.words, b.object->words);
  }
  return b;
}

Built build_existential(Rng& rng) {
  Built b;
  const bool plural = rng.bernoulli(0.5);
  const NounEntry& noun = pick_noun(rng, [](NounField) { return true; });
  static const std::vector<std::string> sg{"a", "no"};
  static const std::vector<std::string> pl{"some", "many", "no"};
  b.words = {"there", plural ? "are" : "is"};
  b.focus = b.words.size();
  NP np = make_np(rng, noun, plural, rng.pick(plural ? pl : sg));
  append(b.words, np.words);
  b.subject = np;
  return b;
}

Built build_ellipsis(Rng& rng) {
  Built first = build_intransitive(rng);
  NP second = random_np(rng, animate);
  Built b = first;
  b.words.push_back("and");
  append(b.words, second.words);
  b.focus = b.words.size();
  b.words.push_back(second.plural ? "do" : "does");
  b.words.push_back("too");
  return b;
}

Built build_wh(Rng& rng) {
  Built b;
  b.subject = random_np(rng, animate);
  b.verb = &pick_verb(rng, true);
  const bool who = !b.verb->edible_object && rng.bernoulli(0.5);
  b.words = {who ? "who" : "what", b.subject.plural ? "do" : "does"};
  append(b.words, b.subject.words);
  b.words.push_back(b.verb->base);
  b.focus = b.words.size();
  b.words.push_back("?");
  return b;
}

Sentence plain_sentence(Rng& rng) {
  static constexpr std::array<double, 8> weights{0.2, 0.24, 0.12, 0.08, 0.08, 0.08, 0.1, 0.1};
  double u = rng.uniform(), acc = 0.0;
  std::size_t kind = 0;
  for (; kind + 1 < weights.size(); ++kind) {
    acc += weights[kind];
    if (u < acc) break;
  }
  switch (kind) {
    case 0: return build_intransitive(rng).words;
    case 1: return build_transitive(rng).words;
    case 2: return build_progressive(rng).words;
    case 3: return build_reflexive(rng).words;
    case 4: return build_npi(rng).words;
    case 5: return build_existential(rng).words;
    case 6: return build_ellipsis(rng).words;
    default: return build_wh(rng).words;
  }
}

Sentence narrative_sentence(Rng& rng) {
  switch (rng.below(3)) {
    case 0: return build_intransitive(rng).words;
    case 1: return build_transitive(rng).words;
    default: return build_progressive(rng).words;
  }
}

// A sentence mentioning `noun` as subject (animate) or object.
Sentence sentence_about(Rng& rng, const NounEntry& noun) {
  const bool plural = rng.bernoulli(0.3);
  NP np = make_np(rng, noun, plural, pick_determiner(rng, plural, false), 0.2);
  if (animate(noun.field)) {
    return rng.bernoulli(0.5) ? build_intransitive(rng, np).words : build_transitive(rng, np).words;
  }
  NP subject = random_np(rng, animate);
  Sentence s = subject.words;
  const VerbEntry* verb = nullptr;
  do {
    verb = &pick_verb(rng, true);
  } while (verb->edible_object && noun.field != NounField::food);
  s.push_back(agree(*verb, subject.plural));
  append(s, np.words);
  return s;
}

struct Comprehension {
  Sentence prompt;
  std::string answer;
  std::vector<std::string> distractors;
};

Comprehension comprehension_item(Rng& rng) {
  Built b = build_transitive(rng);
  const bool who = rng.bernoulli(0.5);
  const NP& target = who ? b.subject : *b.object;
  const NP& other = who ? *b.object : b.subject;
  Comprehension c;
  c.prompt = b.words;
  c.prompt.push_back("?");
  c.prompt.push_back(who ? "who" : "what");
  c.prompt.push_back("=");
  c.answer = target.words.back();
  if (other.words.back() != c.answer) c.distractors.push_back(other.words.back());
  while (c.distractors.size() < 3) {
    const NounEntry& n = pick_noun(rng, [](NounField) { return true; });
    const std::string& w = rng.bernoulli(0.5) ? n.plural : n.singular;
    if (w != c.answer && std::find(c.distractors.begin(), c.distractors.end(), w) == c.distractors.end()) {
      c.distractors.push_back(w);
    }
  }
  return c;
}

const Sentence kGreetingPrompt{"how", "are", "you", "today", "?", "="};
const Sentence kGreetingReply{"i", "am", "fine", "thank", "you"};

// ---------------------------------------------------------------------------
// Recognizer
// ---------------------------------------------------------------------------

struct ParsedNP {
  std::size_t end;
  bool plural;
  NounField field;
  std::string det;
};

std::optional<ParsedNP> parse_np(const Sentence& w, std::size_t i) {
  if (i >= w.size() || !is_determiner(w[i])) return std::nullopt;
  const std::string det = w[i++];
  if (i < w.size() && contains(lexicon().adjectives, w[i])) ++i;
  if (i >= w.size()) return std::nullopt;
  auto noun = lookup_noun(w[i]);
  if (!noun) return std::nullopt;
  const Lexicon& l = lexicon();
  const bool det_ok = contains(l.shared_determiners, det) ||
                      (noun->plural ? contains(l.plural_determiners, det) : contains(l.singular_determiners, det));
  if (!det_ok) return std::nullopt;
  return ParsedNP{i + 1, noun->plural, noun->entry->field, det};
}

bool object_ok(const VerbEntry& v, const ParsedNP& obj) { return !v.edible_object || obj.field == NounField::food; }

// Finite VP after an animate subject; must consume the sentence exactly.
bool parse_vp(const Sentence& w, std::size_t i, const ParsedNP& subj, bool after_ever) {
  if (i >= w.size()) return false;
  if (!after_ever && (w[i] == "is" || w[i] == "are")) {
    if ((w[i] == "are") != subj.plural) return false;
    auto v = lookup_verb(w.at(std::min(i + 1, w.size() - 1)));
    if (i + 1 >= w.size() || !v || v->form != VerbForm::ing) return false;
    if (!v->entry->transitive) return i + 2 == w.size();
    auto obj = parse_np(w, i + 2);
    return obj && obj->end == w.size() && object_ok(*v->entry, *obj);
  }
  auto v = lookup_verb(w[i]);
  if (!v || v->form == VerbForm::ing) return false;
  if ((v->form == VerbForm::base) != subj.plural) return false;
  if (!v->entry->transitive) {
    if (i + 1 == w.size()) return true;
    if (after_ever || w[i + 1] != "and") return false;
    auto second = parse_np(w, i + 2);
    if (!second || !animate(second->field)) return false;
    const std::size_t j = second->end;
    return j + 2 == w.size() && w[j] == (second->plural ? "do" : "does") && w[j + 1] == "too";
  }
  if (i + 2 == w.size() && contains(kReflexives, w[i + 1])) {
    return !after_ever && !v->entry->edible_object && w[i + 1] == reflexive_for(subj.field, subj.plural);
  }
  auto obj = parse_np(w, i + 1);
  return obj && obj->end == w.size() && object_ok(*v->entry, *obj);
}

bool parse_existential(const Sentence& w) {
  if (w.size() < 4 || w[0] != "there" || (w[1] != "is" && w[1] != "are")) return false;
  auto np = parse_np(w, 2);
  if (!np || np->end != w.size() || np->plural != (w[1] == "are")) return false;
  static const std::vector<std::string> sg{"a", "no"};
  static const std::vector<std::string> pl{"some", "many", "no"};
  return contains(np->plural ? pl : sg, np->det);
}

bool parse_wh(const Sentence& w) {
  if (w.size() < 5 || (w[0] != "who" && w[0] != "what") || (w[1] != "does" && w[1] != "do")) return false;
  auto np = parse_np(w, 2);
  if (!np || !animate(np->field) || np->plural != (w[1] == "do")) return false;
  if (np->end + 2 != w.size() || w.back() != "?") return false;
  auto v = lookup_verb(w[np->end]);
  if (!v || v->form != VerbForm::base || !v->entry->transitive) return false;
  return !(w[0] == "who" && v->entry->edible_object);
}

}  // namespace

bool is_function_word(std::string_view w) {
  return is_determiner(w) || contains(kAuxiliaries, w) || contains(kReflexives, w) || contains(kOtherFunction, w);
}

bool is_content_word(std::string_view w) {
  return lookup_noun(w) || lookup_verb(w) || contains(lexicon().adjectives, w) || contains(lexicon().neologisms, w);
}

bool is_verb_class(std::string_view w) { return lookup_verb(w).has_value() || contains(kAuxiliaries, w); }

bool parses(const Sentence& w) {
  if (w.empty()) return false;
  if (w[0] == "there") return parse_existential(w);
  if (w[0] == "who" || w[0] == "what") return parse_wh(w);
  auto subj = parse_np(w, 0);
  if (!subj || !animate(subj->field)) return false;
  std::size_t i = subj->end;
  bool after_ever = false;
  if (i < w.size() && w[i] == "ever") {
    if (subj->det != "no") return false;
    after_ever = true;
    ++i;
  }
  return parse_vp(w, i, *subj, after_ever);
}

std::vector<Sentence> build_grammar_corpus(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<Sentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(plain_sentence(rng));
  return out;
}

std::vector<Sentence> build_training_corpus(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  const Lexicon& lex = lexicon();
  std::vector<Sentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform();
    Sentence s;
    if (u < 0.55) {
      s = plain_sentence(rng);
    } else if (u < 0.67) {
      Sentence target = plain_sentence(rng);
      s = {"repeat", ":"};
      append(s, target);
      s.push_back("=");
      append(s, target);
    } else if (u < 0.76) {
      const auto& [target, definition] = rng.pick(lex.definitions);
      s = {"name", ":"};
      append(s, split_words(definition));
      s.push_back("=");
      s.push_back(target);
    } else if (u < 0.88) {
      Comprehension c = comprehension_item(rng);
      s = c.prompt;
      s.push_back(c.answer);
    } else if (u < 0.98) {
      const NounEntry& noun = pick_noun(rng, [](NounField) { return true; });
      s = {"tell", ":", noun.singular, "="};
      append(s, sentence_about(rng, noun));
    } else {
      s = kGreetingPrompt;
      append(s, kGreetingReply);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::span<const Phenomenon> all_phenomena() {
  static constexpr std::array all{Phenomenon::agreement,     Phenomenon::argument_structure, Phenomenon::binding,
                                  Phenomenon::npi_licensing, Phenomenon::quantifiers,        Phenomenon::ellipsis,
                                  Phenomenon::filler_gap,    Phenomenon::s_selection};
  return all;
}

std::string_view phenomenon_name(Phenomenon p) {
  switch (p) {
    case Phenomenon::agreement: return "agreement";
    case Phenomenon::argument_structure: return "argument_structure";
    case Phenomenon::binding: return "binding";
    case Phenomenon::npi_licensing: return "npi_licensing";
    case Phenomenon::quantifiers: return "quantifiers";
    case Phenomenon::ellipsis: return "ellipsis";
    case Phenomenon::filler_gap: return "filler_gap";
    case Phenomenon::s_selection: return "s_selection";
  }
  return "unknown";
}

Phenomenon phenomenon_from_name(std::string_view name) {
  for (auto p : all_phenomena())
    if (phenomenon_name(p) == name) return p;
  throw LookupError("unknown phenomenon: " + std::string(name));
}

bool is_syntactic(Phenomenon p) {
  switch (p) {
    case Phenomenon::npi_licensing:
    case Phenomenon::quantifiers:
    case Phenomenon::s_selection: return false;
    default: return true;
  }
}

MinimalPair make_minimal_pair(Phenomenon p, Rng& rng) {
  const Lexicon& lex = lexicon();
  MinimalPair pair{{}, {}, p};
  switch (p) {
    case Phenomenon::agreement: {
      Built b = rng.bernoulli(0.35)   ? build_progressive(rng)
                : rng.bernoulli(0.5) ? build_intransitive(rng)
                                     : build_transitive(rng);
      pair.good = b.words;
      pair.bad = b.words;
      std::string& w = pair.bad[b.focus];
      if (w == "is" || w == "are") {
        w = (w == "is") ? "are" : "is";
      } else {
        w = b.subject.plural ? b.verb->third : b.verb->base;
      }
      break;
    }
    case Phenomenon::argument_structure: {
      if (rng.bernoulli(0.5)) {
        Built b = build_transitive(rng);
        pair.good = b.words;
        pair.bad.assign(b.words.begin(), b.words.begin() + static_cast<std::ptrdiff_t>(b.focus + 1));
      } else {
        Built b = build_intransitive(rng);
        pair.good = b.words;
        pair.bad = b.words;
        append(pair.bad, random_np(rng, [](NounField) { return true; }).words);
      }
      break;
    }
    case Phenomenon::binding: {
      Built b = build_reflexive(rng);
      pair.good = b.words;
      pair.bad = b.words;
      std::vector<std::string> wrong;
      for (const char* r : kReflexives)
        if (r != b.words[b.focus]) wrong.emplace_back(r);
      pair.bad[b.focus] = rng.pick(wrong);
      break;
    }
    case Phenomenon::npi_licensing: {
      Built b = build_npi(rng);
      pair.good = b.words;
      pair.bad = b.words;
      static const std::vector<std::string> sg{"the", "a", "every", "this"};
      static const std::vector<std::string> pl{"the", "these", "many", "some"};
      pair.bad[0] = rng.pick(b.subject.plural ? pl : sg);
      break;
    }
    case Phenomenon::quantifiers: {
      Built b = build_existential(rng);
      pair.good = b.words;
      pair.bad = b.words;
      static const std::vector<std::string> sg{"every", "this"};
      static const std::vector<std::string> pl{"these", "the"};
      pair.bad[b.focus] = rng.pick(b.subject.plural ? pl : sg);
      break;
    }
    case Phenomenon::ellipsis: {
      Built b = build_ellipsis(rng);
      pair.good = b.words;
      pair.bad = b.words;
      std::swap(pair.bad[b.focus], pair.bad[b.focus + 1]);
      break;
    }
    case Phenomenon::filler_gap: {
      Built b = build_wh(rng);
      pair.good = b.words;
      pair.bad = b.words;
      Sentence filler = object_for(rng, *b.verb).words;
      pair.bad.insert(pair.bad.begin() + static_cast<std::ptrdiff_t>(b.focus), filler.begin(), filler.end());
      break;
    }
    case Phenomenon::s_selection: {
      if (rng.bernoulli(0.5)) {
        Built b;
        do {
          b = build_transitive(rng);
        } while (!b.verb->edible_object);
        pair.good = b.words;
        pair.bad = b.words;
        const NounEntry& wrong = pick_noun(rng, [](NounField f) { return f == NounField::object; });
        pair.bad.back() = b.object->plural ? wrong.plural : wrong.singular;
      } else {
        Built b = build_intransitive(rng);
        pair.good = b.words;
        pair.bad = b.words;
        const NounEntry& wrong = pick_noun(rng, [](NounField f) { return !animate(f); });
        pair.bad[b.focus - 1] = b.subject.plural ? wrong.plural : wrong.singular;
      }
      break;
    }
  }
  (void)lex;
  return pair;
}

PairSuites build_minimal_pairs(std::uint64_t seed, std::size_t per_phenomenon) {
  if (per_phenomenon < 1) throw InputError("per-phenomenon count must be >= 1");
  PairSuites suites;
  for (auto p : all_phenomena()) {
    Rng rng(derive_seed(seed, "minimal-pairs", phenomenon_name(p)));
    auto& list = suites[p];
    while (list.size() < per_phenomenon) {
      MinimalPair pair = make_minimal_pair(p, rng);
      if (pair.good != pair.bad) list.push_back(std::move(pair));
    }
  }
  return suites;
}

std::string_view phenotype_name(Phenotype p) { return p == Phenotype::broca ? "broca" : "wernicke"; }

Phenotype phenotype_from_name(std::string_view name) {
  if (name == "broca") return Phenotype::broca;
  if (name == "wernicke") return Phenotype::wernicke;
  throw LookupError("unknown phenotype: " + std::string(name));
}

Sentence broca_transform(const Sentence& base, Rng& rng, const BrocaStyle& style) {
  Sentence out;
  for (const auto& w : base) {
    if (is_function_word(w) && w != "who" && w != "what") {
      if (rng.bernoulli(style.function_word_drop)) continue;
      out.push_back(w);
      continue;
    }
    if (contains(lexicon().adjectives, w) && rng.bernoulli(style.adjective_drop)) continue;
    auto v = lookup_verb(w);
    if (v && v->form == VerbForm::third && rng.bernoulli(style.inflection_strip)) {
      out.push_back(v->entry->base);
      continue;
    }
    out.push_back(w);
  }
  if (out.size() > style.max_tokens) out.resize(style.max_tokens);
  if (out.empty()) {
    for (const auto& w : base) {
      if (is_content_word(w)) {
        out.push_back(w);
        break;
      }
    }
  }
  return out;
}

Sentence wernicke_transform(const Sentence& base, Rng& rng, const WernickeStyle& style) {
  const Lexicon& lex = lexicon();
  Sentence out = base;
  for (auto& w : out) {
    if (!is_content_word(w) || !rng.bernoulli(style.substitution)) continue;
    if (rng.bernoulli(style.neologism)) {
      w = rng.pick(lex.neologisms);
    } else if (auto n = lookup_noun(w)) {
      const NounField field = n->entry->field;
      const NounEntry& other = pick_noun(rng, [&](NounField f) { return animate(f) != animate(field) || (!animate(f) && f != field); });
      w = n->plural ? other.plural : other.singular;
    } else if (auto v = lookup_verb(w)) {
      const VerbEntry* other = nullptr;
      do {
        other = &rng.pick(lex.verbs);
      } while (other == v->entry);
      w = verb_form(*other, v->form);
    } else if (contains(lex.adjectives, w)) {
      std::string other;
      do {
        other = rng.pick(lex.adjectives);
      } while (other == w);
      w = other;
    }
  }
  return out;
}

std::vector<Sentence> build_narrative_sentences(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<Sentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(narrative_sentence(rng));
  return out;
}

std::pair<SubtypeCorpus, SubtypeCorpus> build_subtype_corpora(std::uint64_t seed, std::size_t broca_count,
                                                               std::size_t wernicke_count) {
  if (broca_count < 1 || wernicke_count < 1) throw InputError("subtype corpus counts must be >= 1");
  SubtypeCorpus broca{Phenotype::broca, {}, seed};
  SubtypeCorpus wernicke{Phenotype::wernicke, {}, seed};
  Rng rb(derive_seed(seed, "subtype", "broca"));
  for (const auto& s : build_narrative_sentences(derive_seed(seed, "subtype-base", "broca"), broca_count)) {
    broca.utterances.push_back(broca_transform(s, rb));
  }
  Rng rw(derive_seed(seed, "subtype", "wernicke"));
  for (const auto& s : build_narrative_sentences(derive_seed(seed, "subtype-base", "wernicke"), wernicke_count)) {
    wernicke.utterances.push_back(wernicke_transform(s, rw));
  }
  return {std::move(broca), std::move(wernicke)};
}

std::string_view subtest_name(Subtest s) {
  switch (s) {
    case Subtest::SS: return "SS";
    case Subtest::C: return "C";
    case Subtest::R: return "R";
    case Subtest::N: return "N";
  }
  return "?";
}

Subtest subtest_from_name(std::string_view name) {
  for (auto s : {Subtest::SS, Subtest::C, Subtest::R, Subtest::N})
    if (subtest_name(s) == name) return s;
  throw DataError("unknown subtest: " + std::string(name));
}

std::string_view rubric_name(Rubric r) {
  switch (r) {
    case Rubric::keyword_fluency: return "keyword_fluency";
    case Rubric::multiple_choice: return "multiple_choice";
    case Rubric::edit_similarity: return "edit_similarity";
    case Rubric::key_token: return "key_token";
  }
  return "?";
}

Rubric rubric_from_name(std::string_view name) {
  for (auto r : {Rubric::keyword_fluency, Rubric::multiple_choice, Rubric::edit_similarity, Rubric::key_token})
    if (rubric_name(r) == name) return r;
  throw DataError("unknown rubric: " + std::string(name));
}

Rubric rubric_for(Subtest s) {
  switch (s) {
    case Subtest::SS: return Rubric::keyword_fluency;
    case Subtest::C: return Rubric::multiple_choice;
    case Subtest::R: return Rubric::edit_similarity;
    case Subtest::N: return Rubric::key_token;
  }
  return Rubric::edit_similarity;
}

ItemBank build_clinical_items(std::uint64_t seed) {
  constexpr std::size_t kPerSubtest = 24;
  const Lexicon& lex = lexicon();
  ItemBank bank{std::string(kItemBankVersion), {}};
  auto label = [](Subtest s, std::size_t i) {
    std::string id(subtest_name(s));
    id += '-';
    if (i + 1 < 10) id += '0';
    id += std::to_string(i + 1);
    return id;
  };

  Rng rs(derive_seed(seed, "clinic-items", "SS"));
  std::vector<const NounEntry*> topics;
  for (const auto& n : lex.nouns) topics.push_back(&n);
  rs.shuffle(std::span(topics));
  for (std::size_t i = 0; i + 1 < kPerSubtest; ++i) {
    bank.items.push_back({label(Subtest::SS, i), Subtest::SS, "tell : " + topics[i]->singular + " =",
                          SpeechKey{{topics[i]->singular}, 3, 10}, 5.0, Rubric::keyword_fluency});
  }
  bank.items.push_back({label(Subtest::SS, kPerSubtest - 1), Subtest::SS, join_words(kGreetingPrompt),
                        SpeechKey{{"i", "am", "fine"}, 3, 10}, 5.0, Rubric::keyword_fluency});

  Rng rc(derive_seed(seed, "clinic-items", "C"));
  for (std::size_t i = 0; i < kPerSubtest; ++i) {
    Comprehension c = comprehension_item(rc);
    std::vector<std::string> options = c.distractors;
    options.push_back(c.answer);
    rc.shuffle(std::span(options));
    const auto answer = static_cast<std::size_t>(std::find(options.begin(), options.end(), c.answer) - options.begin());
    bank.items.push_back({label(Subtest::C, i), Subtest::C, join_words(c.prompt), ChoiceKey{options, answer}, 2.0,
                          Rubric::multiple_choice});
  }

  Rng rr(derive_seed(seed, "clinic-items", "R"));
  for (std::size_t i = 0; i < kPerSubtest; ++i) {
    Sentence target = narrative_sentence(rr);
    bank.items.push_back({label(Subtest::R, i), Subtest::R, "repeat : " + join_words(target) + " =",
                          RepetitionKey{join_words(target)}, 5.0, Rubric::edit_similarity});
  }

  for (std::size_t i = 0; i < kPerSubtest && i < lex.definitions.size(); ++i) {
    const auto& [target, definition] = lex.definitions[i];
    bank.items.push_back({label(Subtest::N, i), Subtest::N, "name : " + definition + " =", NamingKey{target}, 2.0,
                          Rubric::key_token});
  }
  return bank;
}

void validate_item(const ClinicalItem& item) {
  if (!(item.max_points > 0.0)) throw DataError("item " + item.id + ": max_points must be > 0");
  if (item.rubric != rubric_for(item.subtest)) {
    throw DataError("item " + item.id + ": rubric " + std::string(rubric_name(item.rubric)) +
                    " does not match subtest " + std::string(subtest_name(item.subtest)));
  }
  const bool ok = std::visit(
      [&](const auto& key) -> bool {
        using K = std::decay_t<decltype(key)>;
        if constexpr (std::is_same_v<K, RepetitionKey>) {
          return item.rubric == Rubric::edit_similarity && !split_words(key.target).empty();
        } else if constexpr (std::is_same_v<K, NamingKey>) {
          return item.rubric == Rubric::key_token && split_words(key.target).size() == 1;
        } else if constexpr (std::is_same_v<K, ChoiceKey>) {
          return item.rubric == Rubric::multiple_choice && key.options.size() >= 2 && key.answer < key.options.size();
        } else {
          return item.rubric == Rubric::keyword_fluency && !key.keywords.empty() && key.min_tokens <= key.max_tokens;
        }
      },
      item.key);
  if (!ok) throw DataError("item " + item.id + ": malformed rubric payload");
}

}  // namespace lesionlab
