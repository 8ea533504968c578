#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesionlab/model.hpp"
#include "lesionlab/optim.hpp"
#include "lesionlab/synth.hpp"

namespace lesionlab {

// ---------------------------------------------------------------------------
// Importance fine-tuning
// ---------------------------------------------------------------------------

struct ContributionTable {
  Phenotype phenotype = Phenotype::broca;
  std::vector<UnitId> units;
  std::vector<double> scores;
  std::size_t steps = 0;
  std::string optimizer;
  std::uint64_t base_fingerprint = 0;
};

struct FinetuneConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  OptimizerConfig optimizer{};
  /// Units whose gradients are masked to zero.
  UnitOverrideSet frozen;
  /// Count router column e towards expert e.
  bool include_router = false;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  Model model;
  ContributionTable table;
  /// Per-parameter accumulated |g * theta|, indexed by ParamId.
  std::vector<Tensor> importance;
  std::vector<double> losses;
};

/// Mini-batch index lists of one fine-tuning run, in step order.
std::vector<std::vector<std::size_t>> finetune_batches(std::size_t corpus_size, const FinetuneConfig& config);

/// Zeroes gradient entries that belong to frozen units.
void mask_frozen_gradients(const Model& model, const UnitOverrideSet& frozen, Gradients& grads);

/// importance += |g * theta| elementwise, with theta the pre-update weights.
void accumulate_importance(std::vector<Tensor>& importance, const ParameterStore& params, const Gradients& grads);

/// Sums accumulated importance over each unit's parameters.
std::vector<double> unit_scores(const Model& model, std::span<const Tensor> importance, bool include_router = false);

/// Fine-tunes a copy of `base` on next-token loss and accumulates the
/// gradient-weight importance of every step. `base` is not modified.
FinetuneResult finetune_with_importance(const Model& base, Phenotype phenotype,
                                        std::span<const std::vector<int>> sequences, const FinetuneConfig& config);

/// Units descending by score; ties by (layer, index).
std::vector<UnitId> phenotype_ranking(const ContributionTable& table);

/// First max(1, ceil(p/100 * U)) units. Throws InputError unless 0 < p <= 100.
std::vector<UnitId> select_top_fraction(std::span<const UnitId> ranking, double percent);
std::size_t top_fraction_count(std::size_t unit_count, double percent);

std::string contribution_to_csv(const ContributionTable& table);
std::string contribution_metadata_json(const ContributionTable& table);
ContributionTable contribution_from_files(std::string_view csv, std::string_view metadata_json);

// ---------------------------------------------------------------------------
// Style classifier
// ---------------------------------------------------------------------------

struct ClassifierOptions {
  std::size_t buckets = 4096;
  std::size_t iterations = 2000;
  double learning_rate = 1.0;
  double l2 = 1e-4;
  double holdout_fraction = 0.2;
  bool balance_classes = false;
};

/// Logistic regression over hashed word-unigram and character-trigram
/// counts. Positive class is Wernicke.
class StyleClassifier {
 public:
  StyleClassifier() = default;
  StyleClassifier(std::size_t buckets, std::vector<double> weights, double bias);

  double p_wernicke(std::string_view text) const;
  double probability(std::string_view text, Phenotype p) const;
  Phenotype predict(std::string_view text) const;

  std::size_t buckets() const noexcept { return buckets_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  std::size_t train_count = 0;
  std::size_t heldout_count = 0;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static StyleClassifier from_json(std::string_view text);

 private:
  std::size_t buckets_ = 0;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

/// Sparse L2-normalized feature vector as (bucket, value) pairs.
std::vector<std::pair<std::size_t, double>> style_features(std::string_view text, std::size_t buckets);

StyleClassifier train_style_classifier(const SubtypeCorpus& broca, const SubtypeCorpus& wernicke, std::uint64_t seed,
                                       const ClassifierOptions& options = {});

/// Accuracy of `clf` on labelled texts.
double classifier_accuracy(const StyleClassifier& clf, std::span<const std::string> texts,
                           std::span<const Phenotype> labels);

struct ConsistencyReport {
  double consistency = 0.0;
  double mean_confidence = 0.0;
  std::size_t empty_generations = 0;
  std::vector<std::string> generations;
};

/// Greedy continuation of each prompt; the full utterance (prompt words and
/// continuation) is classified. Empty continuations count as inconsistent.
ConsistencyReport style_consistency(const Model& model, std::span<const std::vector<int>> prompts,
                                    const StyleClassifier& clf, Phenotype expected, std::size_t max_new_tokens = 12);

/// Scores already generated outputs with any p(Wernicke | text) function.
ConsistencyReport style_consistency(std::span<const std::string> outputs,
                                    const std::function<double(std::string_view)>& p_wernicke, Phenotype expected);

/// First `prefix` tokens of held-out narrative sentences, as <bos> prompts.
std::vector<std::vector<int>> style_prompts(std::uint64_t seed, std::size_t count, std::size_t prefix = 2);

}  // namespace lesionlab
