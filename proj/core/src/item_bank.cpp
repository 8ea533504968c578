#include <nlohmann/json.hpp>

#include "lesionlab/errors.hpp"
#include "lesionlab/synth.hpp"

namespace lesionlab {

namespace {

using nlohmann::json;

json key_to_json(const ItemKey& key) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RepetitionKey> || std::is_same_v<K, NamingKey>) {
          return {{"target", k.target}};
        } else if constexpr (std::is_same_v<K, ChoiceKey>) {
          return {{"options", k.options}, {"answer", k.answer}};
        } else {
          return {{"keywords", k.keywords}, {"min_tokens", k.min_tokens}, {"max_tokens", k.max_tokens}};
        }
      },
      key);
}

ItemKey key_from_json(const json& j, Rubric rubric) {
  switch (rubric) {
    case Rubric::edit_similarity: return RepetitionKey{j.at("target").get<std::string>()};
    case Rubric::key_token: return NamingKey{j.at("target").get<std::string>()};
    case Rubric::multiple_choice:
      return ChoiceKey{j.at("options").get<std::vector<std::string>>(), j.at("answer").get<std::size_t>()};
    case Rubric::keyword_fluency:
      return SpeechKey{j.at("keywords").get<std::vector<std::string>>(), j.at("min_tokens").get<std::size_t>(),
                       j.at("max_tokens").get<std::size_t>()};
  }
  throw DataError("unhandled rubric");
}

}  // namespace

std::string item_bank_to_json(const ItemBank& bank) {
  json items = json::array();
  for (const auto& item : bank.items) {
    items.push_back({{"id", item.id},
                     {"subtest", subtest_name(item.subtest)},
                     {"prompt", item.prompt},
                     {"key", key_to_json(item.key)},
                     {"max_points", item.max_points},
                     {"rubric", rubric_name(item.rubric)}});
  }
  json doc = {{"version", bank.version}, {"items", std::move(items)}};
  return doc.dump(2) + "\n";
}

ItemBank item_bank_from_json(std::string_view text) {
  ItemBank bank;
  try {
    const json doc = json::parse(text);
    bank.version = doc.at("version").get<std::string>();
    for (const auto& j : doc.at("items")) {
      ClinicalItem item;
      item.id = j.at("id").get<std::string>();
      item.subtest = subtest_from_name(j.at("subtest").get<std::string>());
      item.prompt = j.at("prompt").get<std::string>();
      item.rubric = rubric_from_name(j.at("rubric").get<std::string>());
      item.max_points = j.at("max_points").get<double>();
      item.key = key_from_json(j.at("key"), item.rubric);
      validate_item(item);
      bank.items.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed item bank: ") + e.what());
  }
  return bank;
}

}  // namespace lesionlab
