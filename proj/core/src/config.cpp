#include "lesionlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/vocab.hpp"

namespace lesionlab {

TrainConfig default_pretraining() {
  TrainConfig t;
  t.epochs = 5;
  t.batch_size = 16;
  t.optimizer.learning_rate = 3e-3;
  t.warmup_steps = 50;
  t.final_lr_fraction = 0.1;
  return t;
}

namespace pt = boost::property_tree;

ModelConfig RunConfig::model_for(Architecture a) const {
  ModelConfig m = model;
  m.architecture = a;
  m.vocab_size = Vocabulary::standard().size();
  m.seed = derive_seed(seed, "model-init", architecture_name(a));
  return m;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(!architectures.empty(), "run.architectures must name at least one architecture");
  require(workers >= 1, "run.workers must be >= 1");
  require(train_sequences >= 1, "data.train_sequences must be >= 1");
  require(pairs_per_phenomenon >= 1, "data.pairs_per_phenomenon must be >= 1");
  require(broca_utterances >= 2 && wernicke_utterances >= 2, "subtype corpora need >= 2 utterances each");
  require(style_prompts >= 20, "data.style_prompts must be >= 20");
  require(style_prefix >= 1, "data.style_prefix must be >= 1");
  for (Architecture a : architectures) model_for(a).validate();
  require(train.epochs >= 1 && train.batch_size >= 1, "train.epochs and train.batch_size must be >= 1");
  require(train.optimizer.learning_rate > 0.0, "train.learning_rate must be > 0");
  require(train.final_lr_fraction > 0.0 && train.final_lr_fraction <= 1.0,
          "train.final_lr_fraction must be in (0, 1]");
  require(finetune_epochs >= 1 && finetune_batch_size >= 1, "finetune.epochs and finetune.batch_size must be >= 1");
  require(finetune_learning_rate > 0.0, "finetune.learning_rate must be > 0");
  require(finetune_seeds >= 1, "finetune.seeds must be >= 1");
  require(!thresholds.empty(), "align.thresholds must not be empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    require(thresholds[i] > 0.0 && thresholds[i] <= 100.0, "align.thresholds must lie in (0, 100]");
    require(i == 0 || thresholds[i - 1] < thresholds[i], "align.thresholds must be strictly increasing");
  }
  require(std::find(thresholds.begin(), thresholds.end(), reference_percent) != thresholds.end(),
          "align.reference must be one of align.thresholds");
  require(heatmap_percent > 0.0 && heatmap_percent <= 100.0, "align.heatmap_percent must lie in (0, 100]");
  require(!budgets.empty(), "lesion.budgets must not be empty");
  for (std::size_t i = 0; i < budgets.size(); ++i)
    require(budgets[i] >= 1 && (i == 0 || budgets[i - 1] < budgets[i]),
            "lesion.budgets must be positive and strictly increasing");
  for (Architecture a : architectures)
    require(budgets.back() <= model_for(a).unit_count(), "lesion.budgets exceed the unit inventory");
  require(!schemes.empty(), "lesion.schemes must not be empty");
  for (LesionScheme s : schemes) require(!is_random_scheme(s), "lesion.schemes lists targeted schemes only");
  require(lesion_seeds >= 1, "lesion.seeds must be >= 1");
  require(finetune_seeds == 1 || finetune_seeds == lesion_seeds,
          "finetune.seeds must be 1 or equal to lesion.seeds");
  require(max_new_tokens >= 1, "lesion.max_new_tokens must be >= 1");
  require(std::find(budgets.begin(), budgets.end(), qualitative_budget) != budgets.end(),
          "lesion.qualitative_budget must be one of lesion.budgets");
  Sentence prompt = split_words(qualitative_prompt);
  require(!prompt.empty(), "lesion.qualitative_prompt must not be empty");
  for (const auto& w : prompt)
    require(Vocabulary::standard().find(w).has_value(), "lesion.qualitative_prompt has unknown word '" + w + "'");
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) throw ConfigError(key + ": not a number: '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

// Each key binds a parser and a printer over one RunConfig field.
struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

template <typename T>
Field number(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

template <typename T>
Field nested(std::function<T&(RunConfig&)> get, std::function<const T&(const RunConfig&)> cget) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_number<T>(k, v); },
          [cget](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(cget(c));
            else
              return std::to_string(cget(c));
          }};
}

#define LL_NESTED(type, path) \
  nested<type>([](RunConfig& c) -> type& { return c.path; }, [](const RunConfig& c) -> const type& { return c.path; })

Field flag(bool RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& schema() {
  static const auto table = [] {
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>> s;
    s.push_back({"run",
                 {{"seed", number(&RunConfig::seed)},
                  {"architectures",
                   {[](RunConfig& c, const std::string&, const std::string& v) {
                      c.architectures.clear();
                      for (const auto& name : split_list(v)) {
                        if (name == "both") {
                          c.architectures = {Architecture::dense, Architecture::moe};
                          continue;
                        }
                        try {
                          c.architectures.push_back(architecture_from_name(name));
                        } catch (const Error& e) {
                          throw ConfigError(std::string("run.architectures: ") + e.what());
                        }
                      }
                    },
                    [](const RunConfig& c) {
                      std::vector<std::string> names;
                      for (auto a : c.architectures) names.emplace_back(architecture_name(a));
                      return join(names);
                    }}},
                  {"workers", number(&RunConfig::workers)},
                  {"item_bank",
                   {[](RunConfig& c, const std::string&, const std::string& v) { c.item_bank = v; },
                    [](const RunConfig& c) { return c.item_bank.generic_string(); }}}}});
    s.push_back({"data",
                 {{"train_sequences", number(&RunConfig::train_sequences)},
                  {"pairs_per_phenomenon", number(&RunConfig::pairs_per_phenomenon)},
                  {"broca_utterances", number(&RunConfig::broca_utterances)},
                  {"wernicke_utterances", number(&RunConfig::wernicke_utterances)},
                  {"style_prompts", number(&RunConfig::style_prompts)},
                  {"style_prefix", number(&RunConfig::style_prefix)}}});
    s.push_back({"model",
                 {{"context_length", LL_NESTED(std::size_t, model.context_length)},
                  {"width", LL_NESTED(std::size_t, model.width)},
                  {"layers", LL_NESTED(std::size_t, model.layers)},
                  {"heads", LL_NESTED(std::size_t, model.heads)},
                  {"ffn_hidden", LL_NESTED(std::size_t, model.ffn_hidden)},
                  {"groups", LL_NESTED(std::size_t, model.groups)},
                  {"experts", LL_NESTED(std::size_t, model.experts)},
                  {"active_experts", LL_NESTED(std::size_t, model.active_experts)},
                  {"expert_hidden", LL_NESTED(std::size_t, model.expert_hidden)},
                  {"renormalize_ablated_gates",
                   {[](RunConfig& c, const std::string& k, const std::string& v) {
                      c.model.renormalize_ablated_gates = parse_bool(k, v);
                    },
                    [](const RunConfig& c) {
                      return std::string(c.model.renormalize_ablated_gates ? "true" : "false");
                    }}}}});
    s.push_back({"train",
                 {{"epochs", LL_NESTED(std::size_t, train.epochs)},
                  {"batch_size", LL_NESTED(std::size_t, train.batch_size)},
                  {"learning_rate", LL_NESTED(double, train.optimizer.learning_rate)},
                  {"weight_decay", LL_NESTED(double, train.optimizer.weight_decay)},
                  {"warmup_steps", LL_NESTED(std::size_t, train.warmup_steps)},
                  {"final_lr_fraction", LL_NESTED(double, train.final_lr_fraction)}}});
    s.push_back({"finetune",
                 {{"epochs", number(&RunConfig::finetune_epochs)},
                  {"batch_size", number(&RunConfig::finetune_batch_size)},
                  {"learning_rate", number(&RunConfig::finetune_learning_rate)},
                  {"seeds", number(&RunConfig::finetune_seeds)},
                  {"include_router", flag(&RunConfig::include_router)},
                  {"classifier_buckets", LL_NESTED(std::size_t, classifier.buckets)},
                  {"classifier_iterations", LL_NESTED(std::size_t, classifier.iterations)}}});
    s.push_back({"align",
                 {{"thresholds",
                   {[](RunConfig& c, const std::string& k, const std::string& v) {
                      c.thresholds.clear();
                      for (const auto& t : split_list(v)) c.thresholds.push_back(parse_number<double>(k, t));
                    },
                    [](const RunConfig& c) {
                      std::vector<std::string> items;
                      for (double t : c.thresholds) items.push_back(format_double(t));
                      return join(items);
                    }}},
                  {"reference", number(&RunConfig::reference_percent)},
                  {"heatmap_percent", number(&RunConfig::heatmap_percent)}}});
    s.push_back({"lesion",
                 {{"budgets",
                   {[](RunConfig& c, const std::string& k, const std::string& v) {
                      c.budgets.clear();
                      for (const auto& b : split_list(v)) c.budgets.push_back(parse_number<std::size_t>(k, b));
                    },
                    [](const RunConfig& c) {
                      std::vector<std::string> items;
                      for (auto b : c.budgets) items.push_back(std::to_string(b));
                      return join(items);
                    }}},
                  {"schemes",
                   {[](RunConfig& c, const std::string&, const std::string& v) {
                      c.schemes.clear();
                      for (const auto& name : split_list(v)) {
                        try {
                          c.schemes.push_back(scheme_from_name(name));
                        } catch (const Error& e) {
                          throw ConfigError(std::string("lesion.schemes: ") + e.what());
                        }
                      }
                    },
                    [](const RunConfig& c) {
                      std::vector<std::string> items;
                      for (auto s : c.schemes) items.emplace_back(scheme_name(s));
                      return join(items);
                    }}},
                  {"seeds", number(&RunConfig::lesion_seeds)},
                  {"zero_biases", flag(&RunConfig::zero_biases)},
                  {"max_new_tokens", number(&RunConfig::max_new_tokens)},
                  {"qualitative_budget", number(&RunConfig::qualitative_budget)},
                  {"qualitative_prompt",
                   {[](RunConfig& c, const std::string&, const std::string& v) { c.qualitative_prompt = v; },
                    [](const RunConfig& c) { return c.qualitative_prompt; }}}}});
    return s;
  }();
  return table;
}

#undef LL_NESTED

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    const auto& sections = schema();
    auto sec = std::find_if(sections.begin(), sections.end(), [&](const auto& s) { return s.first == section; });
    if (sec == sections.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : keys) {
      auto field = std::find_if(sec->second.begin(), sec->second.end(), [&](const auto& f) { return f.first == key; });
      if (field == sec->second.end()) throw ConfigError("unknown config key " + section + "." + key);
      field->second.read(config, section + "." + key, value.data());
    }
  }
  if (!config.item_bank.empty() && config.item_bank.is_relative() && !base_dir.empty())
    config.item_bank = (base_dir / config.item_bank).lexically_normal();
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

std::string config_to_ini(const RunConfig& config) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, fields] : schema()) {
    out << (first ? "" : "\n") << '[' << section << "]\n";
    first = false;
    for (const auto& [key, field] : fields) out << key << " = " << field.write(config) << '\n';
  }
  return out.str();
}

}  // namespace lesionlab
