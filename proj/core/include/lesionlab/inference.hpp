#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lesionlab/model.hpp"

namespace lesionlab {

// Graph-free evaluation. Every path (full-sequence scoring, resumed
// scoring, incremental decoding) runs the same per-row kernels, so the
// results agree bit for bit. The model's permanent zero mask is always
// applied on top of the per-call overrides.

/// Residual stream and routing recorded during one forward pass.
struct ForwardTrace {
  std::size_t length = 0;
  /// residual[l] holds the n x width input of layer l; residual[L] is the
  /// output of the last layer.
  std::vector<std::vector<double>> residual;
  /// routed[l][t * E + e] != 0 when expert e was selected at position t.
  std::vector<std::vector<std::uint8_t>> routed;
  /// log p(token_i | prefix) for i = 1..n-1.
  std::vector<double> log_probs;

  double avg_log_prob() const;
  bool expert_routed(std::size_t layer, std::size_t expert) const;
};

ForwardTrace trace_sequence(const Model& model, std::span<const int> tokens, const UnitOverrideSet& overrides = {});

/// Mean log-probability over positions 1..n-1.
double avg_log_prob(const Model& model, std::span<const int> tokens, const UnitOverrideSet& overrides = {});

/// Re-scores the traced sequence with extra overrides, recomputing only the
/// layers at or after the first overridden one. When every extra unit is an
/// expert that was never routed in the trace the traced value is returned.
double avg_log_prob_resumed(const Model& model, std::span<const int> tokens, const ForwardTrace& base,
                            const UnitOverrideSet& extra);

/// Greedy decoding (ties to the lower token id). Returns the prompt followed
/// by the generated tokens; <eos> ends generation and is not included.
std::vector<int> generate(const Model& model, std::span<const int> prompt, std::size_t max_new_tokens,
                          const UnitOverrideSet& overrides = {});

/// Per-position contribution of `unit` to its layer's FFN output (already
/// gate-scaled for experts), n x width.
std::vector<double> capture_unit_output(const Model& model, std::span<const int> tokens, UnitId unit,
                                        const UnitOverrideSet& overrides = {});

/// Logits of the final position.
std::vector<double> next_token_logits(const Model& model, std::span<const int> tokens,
                                      const UnitOverrideSet& overrides = {});

}  // namespace lesionlab
