#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesionlab/model.hpp"
#include "lesionlab/synth.hpp"

namespace lesionlab {

using TokenPair = std::pair<std::vector<int>, std::vector<int>>;

/// One minimal-pair task: (good, bad) token sequences.
struct Task {
  std::string name;
  std::vector<TokenPair> pairs;
};

/// Encodes every suite as <bos> ... <eos> sequences, in phenomenon order.
std::vector<Task> encode_tasks(const PairSuites& suites, const Vocabulary& vocab);
std::uint64_t task_set_fingerprint(std::span<const Task> tasks);

using SequenceScorer = std::function<double(std::span<const int>)>;

/// Fraction of pairs whose good sequence scores strictly higher; ties count
/// as incorrect.
double task_accuracy(const SequenceScorer& score, const Task& task);
double task_accuracy(const Model& model, const Task& task, const UnitOverrideSet& overrides = {});

struct AttributionMap {
  std::vector<std::string> tasks;
  std::vector<double> baseline;
  std::vector<UnitId> units;
  /// delta[t][u] = accuracy with unit u ablated minus baseline accuracy.
  std::vector<std::vector<double>> delta;
  std::uint64_t model_fingerprint = 0;
  std::uint64_t task_fingerprint = 0;
  std::size_t ablated_evaluations = 0;

  /// Throws LookupError for unknown task names.
  std::size_t task_index(std::string_view task) const;
  /// Throws DataError for units the map does not cover.
  std::size_t unit_index(UnitId unit) const;
};

struct SweepOptions {
  std::size_t workers = 1;
};

/// Ablates every unit alone and records the accuracy change on every task.
AttributionMap zero_ablation_sweep(const Model& model, std::span<const Task> tasks, const SweepOptions& options = {});

/// Units ascending by delta; ties by (layer, index).
std::vector<UnitId> phenomenon_ranking(const AttributionMap& map, std::string_view task);

/// Rows = units, columns = tasks.
std::string attribution_to_csv(const AttributionMap& map);
std::string attribution_metadata_json(const AttributionMap& map);
AttributionMap attribution_from_files(std::string_view csv, std::string_view metadata_json);

}  // namespace lesionlab
