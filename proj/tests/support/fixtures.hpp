#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lesionlab/model.hpp"
#include "lesionlab/phenotype.hpp"
#include "lesionlab/probe.hpp"

namespace lesionlab::fixtures {

/// Small randomly initialised model over the standard vocabulary.
ModelConfig tiny_config(Architecture arch, std::uint64_t seed = 7);
Model tiny_model(Architecture arch, std::uint64_t seed = 7);

/// One-layer, two-expert MoE (k = 1) whose attention block is silenced and
/// whose router always picks expert 0. Expert 0 detects plural nouns and
/// pushes the next-token distribution from "runs" towards "run"; without
/// it the model prefers "runs" everywhere.
Model agreement_model();

/// The four agreement pairs the fixture is scored on: two singular
/// subjects (correct either way) and two plural ones (correct only with
/// expert 0 active).
Task agreement_task();

/// Independent forward pass for agreement_model(): embeddings, the routed
/// expert (skipped when `with_expert` is false), final layer norm and
/// head, written directly from the parameter values.
double reference_avg_log_prob(const Model& model, std::span<const int> tokens, bool with_expert);

/// Six short utterances; with batch size 3 they give two optimizer steps.
std::vector<std::vector<int>> six_sequences();

/// Two plain-SGD steps without weight decay.
FinetuneConfig two_step_sgd();

/// Re-runs fine-tuning by hand: gradients from the graph, then elementwise
/// |g * theta| with the pre-update weights and a plain SGD update. Fills
/// per-parameter importance and returns the step losses.
std::vector<double> replay_importance(Model model, std::span<const std::vector<int>> seqs,
                                      const FinetuneConfig& config, std::vector<Tensor>& importance);

/// Sum of replayed importance over a unit's parameters, addressed by name
/// and column/row ranges rather than through unit_parameters().
double replay_unit_score(const Model& model, const std::vector<Tensor>& importance, UnitId unit);

/// Encodes space-separated words as <bos> ... <eos>.
std::vector<int> sequence(const std::string& text);

}  // namespace lesionlab::fixtures
