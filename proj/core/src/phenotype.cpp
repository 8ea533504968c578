#include "lesionlab/phenotype.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/inference.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/rng.hpp"

namespace lesionlab {

using nlohmann::json;

std::vector<std::vector<std::size_t>> finetune_batches(std::size_t corpus_size, const FinetuneConfig& config) {
  if (corpus_size == 0) throw InputError("fine-tuning corpus is empty");
  if (config.batch_size == 0 || config.epochs == 0) throw ConfigError("batch_size and epochs must be >= 1");
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> order(corpus_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, "finetune-epoch", std::to_string(epoch)));
    rng.shuffle(std::span(order));
    for (std::size_t b = 0; b < corpus_size; b += config.batch_size) {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(corpus_size, b + config.batch_size)));
    }
  }
  return batches;
}

void mask_frozen_gradients(const Model& model, const UnitOverrideSet& frozen, Gradients& grads) {
  for (const auto& u : frozen) {
    for (const auto& slice : unit_parameters(model, u)) {
      auto it = grads.find(slice.param);
      if (it == grads.end()) continue;
      Tensor& g = it->second;
      slice.for_each(g, [&](std::size_t i) { g[i] = 0.0; });
    }
  }
}

void accumulate_importance(std::vector<Tensor>& importance, const ParameterStore& params, const Gradients& grads) {
  if (importance.size() < params.size()) importance.resize(params.size());
  for (const auto& [id, g] : grads) {
    const Tensor& w = params.tensor(id);
    Tensor& acc = importance[id];
    if (acc.size() == 0) acc = Tensor(w.shape());
    for (std::size_t i = 0; i < w.size(); ++i) acc[i] += std::abs(g[i] * w[i]);
  }
}

std::vector<double> unit_scores(const Model& model, std::span<const Tensor> importance, bool include_router) {
  const auto units = model.units();
  std::vector<double> scores(units.size(), 0.0);
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (const auto& slice : unit_parameters(model, units[u])) {
      if (slice.param >= importance.size() || importance[slice.param].size() == 0) continue;
      const Tensor& acc = importance[slice.param];
      slice.for_each(acc, [&](std::size_t i) { scores[u] += acc[i]; });
    }
    if (include_router && units[u].kind == UnitKind::expert) {
      const ParamId r = model.layer(units[u].layer).router;
      if (r < importance.size() && importance[r].size() != 0) {
        const ParamSlice column{r, SliceAxis::columns, units[u].index, units[u].index + 1};
        column.for_each(importance[r], [&](std::size_t i) { scores[u] += importance[r][i]; });
      }
    }
  }
  return scores;
}

FinetuneResult finetune_with_importance(const Model& base, Phenotype phenotype,
                                        std::span<const std::vector<int>> sequences, const FinetuneConfig& config) {
  for (const auto& u : config.frozen)
    if (!base.has_unit(u)) throw LookupError("unknown frozen unit " + unit_label(u));
  FinetuneResult result{base, {}, {}, {}};
  Model& model = result.model;
  Optimizer opt(config.optimizer);
  result.importance.resize(model.params().size());
  for (ParamId id = 0; id < model.params().size(); ++id) result.importance[id] = Tensor(model.params().tensor(id).shape());

  const auto batches = finetune_batches(sequences.size(), config);
  for (std::size_t step = 0; step < batches.size(); ++step) {
    std::vector<std::vector<int>> seqs;
    for (auto i : batches[step]) seqs.push_back(sequences[i]);
    const Batch batch = make_batch(seqs);
    Graph g;
    Gradients grads;
    try {
      const Var loss = forward_loss(g, model, batch);
      result.losses.push_back(g.value(loss).item());
      grads = g.backward(loss);
    } catch (const NumericError& e) {
      throw NumericError("fine-tuning aborted at step " + std::to_string(step) + ": " + e.what());
    }
    mask_frozen_gradients(model, config.frozen, grads);
    accumulate_importance(result.importance, model.params(), grads);
    opt.step(model.params(), grads);
  }

  ContributionTable& table = result.table;
  table.phenotype = phenotype;
  table.units = model.units();
  table.scores = unit_scores(model, result.importance, config.include_router);
  table.steps = batches.size();
  table.optimizer = opt.describe();
  table.base_fingerprint = base.fingerprint();
  return result;
}

std::vector<UnitId> phenotype_ranking(const ContributionTable& table) {
  std::vector<std::size_t> idx(table.units.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (table.scores[a] != table.scores[b]) return table.scores[a] > table.scores[b];
    return std::tie(table.units[a].layer, table.units[a].index) < std::tie(table.units[b].layer, table.units[b].index);
  });
  std::vector<UnitId> out;
  for (auto i : idx) out.push_back(table.units[i]);
  return out;
}

std::size_t top_fraction_count(std::size_t unit_count, double percent) {
  if (!(percent > 0.0 && percent <= 100.0)) {
    throw InputError("top fraction must satisfy 0 < p <= 100, got " + format_double(percent));
  }
  const double raw = std::ceil(percent / 100.0 * static_cast<double>(unit_count) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, unit_count);
}

std::vector<UnitId> select_top_fraction(std::span<const UnitId> ranking, double percent) {
  if (ranking.empty()) throw InputError("empty ranking");
  const std::size_t n = top_fraction_count(ranking.size(), percent);
  return {ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::string contribution_to_csv(const ContributionTable& table) {
  const auto ranking = phenotype_ranking(table);
  std::map<UnitId, std::size_t> rank;
  for (std::size_t i = 0; i < ranking.size(); ++i) rank[ranking[i]] = i + 1;
  std::ostringstream out;
  out << "unit,score,rank\n";
  for (std::size_t u = 0; u < table.units.size(); ++u) {
    out << unit_label(table.units[u]) << ',' << format_double(table.scores[u]) << ',' << rank[table.units[u]] << '\n';
  }
  return out.str();
}

std::string contribution_metadata_json(const ContributionTable& table) {
  json doc = {{"phenotype", phenotype_name(table.phenotype)},
              {"steps", table.steps},
              {"optimizer", table.optimizer},
              {"unit_count", table.units.size()},
              {"base_fingerprint", to_hex(table.base_fingerprint)}};
  return doc.dump(2) + "\n";
}

ContributionTable contribution_from_files(std::string_view csv, std::string_view metadata_json) {
  ContributionTable table;
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "unit,score,rank") throw DataError("unexpected contribution CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw DataError("malformed contribution row: " + line);
    try {
      table.units.push_back(parse_unit_label(line.substr(0, c1)));
    } catch (const LookupError& e) {
      throw DataError(e.what());
    }
    double v = 0.0;
    const std::string s = line.substr(c1 + 1, c2 - c1 - 1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw DataError("malformed score '" + s + "'");
    table.scores.push_back(v);
  }
  try {
    const json meta = json::parse(metadata_json);
    table.phenotype = phenotype_from_name(meta.at("phenotype").get<std::string>());
    table.steps = meta.at("steps");
    table.optimizer = meta.at("optimizer");
    const std::string fp = meta.at("base_fingerprint");
    std::from_chars(fp.data(), fp.data() + fp.size(), table.base_fingerprint, 16);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed contribution metadata: ") + e.what());
  } catch (const LookupError& e) {
    throw DataError(e.what());
  }
  return table;
}

// ---------------------------------------------------------------------------
// Style classifier
// ---------------------------------------------------------------------------

std::vector<std::pair<std::size_t, double>> style_features(std::string_view text, std::size_t buckets) {
  if (buckets == 0) throw ConfigError("classifier needs at least one bucket");
  std::map<std::size_t, double> counts;
  auto add = [&](std::string_view prefix, std::string_view feature) {
    Fingerprint fp;
    fp.text(prefix).text(feature);
    counts[fp.value() % buckets] += 1.0;
  };
  const Sentence words = split_words(text);
  for (const auto& w : words) add("w", w);
  const std::string padded = " " + join_words(words) + " ";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add("c", std::string_view(padded).substr(i, 3));
  double norm = 0.0;
  for (const auto& [k, v] : counts) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& [k, v] : counts) out.emplace_back(k, v / norm);
  return out;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double logit(const std::vector<std::pair<std::size_t, double>>& x, const std::vector<double>& w, double b) {
  double z = b;
  for (const auto& [k, v] : x) z += w[k] * v;
  return z;
}

}  // namespace

StyleClassifier::StyleClassifier(std::size_t buckets, std::vector<double> weights, double bias)
    : buckets_(buckets), weights_(std::move(weights)), bias_(bias) {
  if (weights_.size() != buckets_) throw ConfigError("classifier weight count must equal bucket count");
}

double StyleClassifier::p_wernicke(std::string_view text) const {
  return sigmoid(logit(style_features(text, buckets_), weights_, bias_));
}

double StyleClassifier::probability(std::string_view text, Phenotype p) const {
  const double pw = p_wernicke(text);
  return p == Phenotype::wernicke ? pw : 1.0 - pw;
}

Phenotype StyleClassifier::predict(std::string_view text) const {
  return p_wernicke(text) >= 0.5 ? Phenotype::wernicke : Phenotype::broca;
}

std::string StyleClassifier::to_json() const {
  json doc = {{"features", {{"word_ngram_orders", {1}}, {"char_ngram_orders", {3}}, {"buckets", buckets_}}},
              {"weights", weights_},
              {"bias", bias_},
              {"positive_class", "wernicke"},
              {"train_accuracy", train_accuracy},
              {"heldout_accuracy", heldout_accuracy},
              {"train_count", train_count},
              {"heldout_count", heldout_count},
              {"seed", seed}};
  return doc.dump() + "\n";
}

StyleClassifier StyleClassifier::from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    StyleClassifier clf(doc.at("features").at("buckets").get<std::size_t>(),
                        doc.at("weights").get<std::vector<double>>(), doc.at("bias").get<double>());
    clf.train_accuracy = doc.at("train_accuracy");
    clf.heldout_accuracy = doc.at("heldout_accuracy");
    clf.train_count = doc.at("train_count");
    clf.heldout_count = doc.at("heldout_count");
    clf.seed = doc.at("seed");
    return clf;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed classifier file: ") + e.what());
  }
}

double classifier_accuracy(const StyleClassifier& clf, std::span<const std::string> texts,
                           std::span<const Phenotype> labels) {
  if (texts.size() != labels.size() || texts.empty()) throw InputError("need matching non-empty texts and labels");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < texts.size(); ++i)
    if (clf.predict(texts[i]) == labels[i]) ++ok;
  return static_cast<double>(ok) / static_cast<double>(texts.size());
}

StyleClassifier train_style_classifier(const SubtypeCorpus& broca, const SubtypeCorpus& wernicke, std::uint64_t seed,
                                       const ClassifierOptions& options) {
  if (broca.utterances.empty() || wernicke.utterances.empty()) {
    throw ConfigError("style classifier needs utterances of both phenotypes");
  }
  std::vector<std::string> train_text, test_text;
  std::vector<Phenotype> train_label, test_label;
  for (const SubtypeCorpus* corpus : {&broca, &wernicke}) {
    std::vector<std::size_t> idx(corpus->utterances.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, "classifier-split", phenotype_name(corpus->phenotype)));
    rng.shuffle(std::span(idx));
    const auto held = static_cast<std::size_t>(
        std::ceil(options.holdout_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::string text = join_words(corpus->utterances[idx[i]]);
      if (i < held) {
        test_text.push_back(text);
        test_label.push_back(corpus->phenotype);
      } else {
        train_text.push_back(text);
        train_label.push_back(corpus->phenotype);
      }
    }
  }
  if (train_text.empty()) throw ConfigError("no training utterances left after the hold-out split");

  std::vector<std::vector<std::pair<std::size_t, double>>> X;
  std::vector<double> y;
  for (std::size_t i = 0; i < train_text.size(); ++i) {
    X.push_back(style_features(train_text[i], options.buckets));
    y.push_back(train_label[i] == Phenotype::wernicke ? 1.0 : 0.0);
  }
  // Optional balanced weights n / (2 n_c) for skewed corpora.
  const double positives = std::accumulate(y.begin(), y.end(), 0.0);
  std::array<double, 2> class_weight{1.0, 1.0};
  if (options.balance_classes && positives > 0.0 && positives < static_cast<double>(y.size())) {
    class_weight[0] = static_cast<double>(y.size()) / (2.0 * (static_cast<double>(y.size()) - positives));
    class_weight[1] = static_cast<double>(y.size()) / (2.0 * positives);
  }
  // Full-batch gradient descent; deterministic and plenty for ~1k examples.
  std::vector<double> w(options.buckets, 0.0), gw(options.buckets);
  double b = 0.0;
  const double n = static_cast<double>(X.size());
  for (std::size_t it = 0; it < options.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      const double r = class_weight[y[i] > 0.5 ? 1 : 0] * (sigmoid(logit(X[i], w, b)) - y[i]);
      for (const auto& [k, v] : X[i]) gw[k] += r * v;
      gb += r;
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= options.learning_rate * (gw[k] / n + options.l2 * w[k]);
    b -= options.learning_rate * gb / n;
  }
  StyleClassifier clf(options.buckets, std::move(w), b);
  clf.seed = seed;
  clf.train_count = train_text.size();
  clf.heldout_count = test_text.size();
  clf.train_accuracy = classifier_accuracy(clf, train_text, train_label);
  clf.heldout_accuracy = test_text.empty() ? 0.0 : classifier_accuracy(clf, test_text, test_label);
  return clf;
}

ConsistencyReport style_consistency(std::span<const std::string> outputs,
                                    const std::function<double(std::string_view)>& p_wernicke, Phenotype expected) {
  if (outputs.empty()) throw InputError("no outputs to classify");
  ConsistencyReport report;
  std::size_t consistent = 0;
  double confidence = 0.0;
  for (const auto& text : outputs) {
    report.generations.push_back(text);
    if (split_words(text).empty()) {
      ++report.empty_generations;
      continue;
    }
    const double pw = p_wernicke(text);
    const double p = expected == Phenotype::wernicke ? pw : 1.0 - pw;
    const Phenotype predicted = pw >= 0.5 ? Phenotype::wernicke : Phenotype::broca;
    if (predicted == expected) ++consistent;
    confidence += p;
  }
  const double n = static_cast<double>(outputs.size());
  report.consistency = static_cast<double>(consistent) / n;
  report.mean_confidence = confidence / n;
  return report;
}

ConsistencyReport style_consistency(const Model& model, std::span<const std::vector<int>> prompts,
                                    const StyleClassifier& clf, Phenotype expected, std::size_t max_new_tokens) {
  if (prompts.size() < 20) throw InputError("style consistency needs at least 20 prompts");
  const Vocabulary& vocab = Vocabulary::standard();
  std::vector<std::string> outputs;
  for (const auto& prompt : prompts) {
    // The classifier is trained on whole utterances, so it sees the prompt
    // words too; a prompt with no continuation still counts as empty.
    const auto out = generate(model, prompt, max_new_tokens);
    outputs.push_back(out.size() == prompt.size() ? std::string() : vocab.decode(out));
  }
  return style_consistency(outputs, [&](std::string_view t) { return clf.p_wernicke(t); }, expected);
}

std::vector<std::vector<int>> style_prompts(std::uint64_t seed, std::size_t count, std::size_t prefix) {
  const Vocabulary& vocab = Vocabulary::standard();
  std::vector<std::vector<int>> prompts;
  for (const auto& s : build_narrative_sentences(derive_seed(seed, "style-prompts", "narrative"), count)) {
    std::vector<int> p{vocab.bos()};
    for (std::size_t i = 0; i < std::min(prefix, s.size()); ++i) p.push_back(vocab.id(s[i]));
    prompts.push_back(std::move(p));
  }
  return prompts;
}

}  // namespace lesionlab
