#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lesionlab/autodiff.hpp"
#include "lesionlab/params.hpp"

namespace lesionlab {

enum class Architecture { dense, moe };
std::string_view architecture_name(Architecture a);
Architecture architecture_from_name(std::string_view name);

struct ModelConfig {
  Architecture architecture = Architecture::moe;
  std::size_t vocab_size = 0;
  std::size_t context_length = 64;
  std::size_t width = 32;
  std::size_t layers = 6;
  std::size_t heads = 4;
  // dense
  std::size_t ffn_hidden = 128;
  std::size_t groups = 16;
  // moe
  std::size_t experts = 16;
  std::size_t active_experts = 4;
  std::size_t expert_hidden = 32;
  /// Re-normalize surviving gates when an expert is ablated.
  bool renormalize_ablated_gates = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
  std::size_t units_per_layer() const noexcept {
    return architecture == Architecture::moe ? experts : groups;
  }
  std::size_t unit_count() const noexcept { return layers * units_per_layer(); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class UnitKind { expert, neuron_group };

struct UnitId {
  std::uint32_t layer = 0;
  std::uint32_t index = 0;
  UnitKind kind = UnitKind::expert;

  friend auto operator<=>(const UnitId&, const UnitId&) = default;
};

/// "L2.E5" for experts, "L2.G5" for neuron groups.
std::string unit_label(UnitId u);
/// Inverse of unit_label; throws LookupError on malformed labels.
UnitId parse_unit_label(std::string_view label);

/// Units whose FFN output is forced to zero in one evaluation context.
using UnitOverrideSet = std::set<UnitId>;

/// Which part of a parameter tensor belongs to a unit.
enum class SliceAxis { whole, columns, rows };

struct ParamSlice {
  ParamId param = 0;
  SliceAxis axis = SliceAxis::whole;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t element_count(const Tensor& t) const;
  /// Calls f(flat_index) for every element of `t` covered by the slice.
  template <typename F>
  void for_each(const Tensor& t, F&& f) const {
    switch (axis) {
      case SliceAxis::whole:
        for (std::size_t i = 0; i < t.size(); ++i) f(i);
        break;
      case SliceAxis::columns:
        for (std::size_t r = 0; r < t.rows(); ++r)
          for (std::size_t c = begin; c < end; ++c) f(r * t.cols() + c);
        break;
      case SliceAxis::rows:
        for (std::size_t r = begin; r < end; ++r)
          for (std::size_t c = 0; c < t.cols(); ++c) f(r * t.cols() + c);
        break;
    }
  }
  friend bool operator==(const ParamSlice&, const ParamSlice&) = default;
};

/// Parameter ids of one transformer layer.
struct LayerParams {
  ParamId ln1_g, ln1_b;
  ParamId wq, bq, wk, bk, wv, bv, wo, bo;
  ParamId ln2_g, ln2_b;
  // dense
  ParamId ffn_w_in = 0, ffn_b_in = 0, ffn_w_out = 0;
  // moe
  ParamId router = 0;
  struct Expert {
    ParamId w_in, b_in, w_out, b_out;
  };
  std::vector<Expert> experts;
};

/// Decoder-only pre-norm transformer with either a dense FFN or a top-k
/// mixture of experts in every layer.
class Model {
 public:
  Model(ModelConfig config, ParameterStore params);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  ParamId tok_emb() const noexcept { return tok_emb_; }
  ParamId pos_emb() const noexcept { return pos_emb_; }
  const LayerParams& layer(std::size_t l) const { return layers_.at(l); }
  ParamId ln_f_g() const noexcept { return ln_f_g_; }
  ParamId ln_f_b() const noexcept { return ln_f_b_; }
  ParamId lm_head() const noexcept { return lm_head_; }

  /// All units in (layer, index) order.
  std::vector<UnitId> units() const;
  bool has_unit(UnitId u) const noexcept;

  /// Permanent output mask (zeroing lesion); persisted with checkpoints.
  const UnitOverrideSet& zero_mask() const noexcept { return zero_mask_; }
  void mask_unit(UnitId u);

  /// Stable hash of config, parameters and mask.
  std::uint64_t fingerprint() const;

 private:
  ModelConfig config_;
  ParameterStore params_;
  ParamId tok_emb_ = 0, pos_emb_ = 0;
  std::vector<LayerParams> layers_;
  ParamId ln_f_g_ = 0, ln_f_b_ = 0, lm_head_ = 0;
  UnitOverrideSet zero_mask_;
};

/// Xavier-uniform matrices, zero biases, unit layer-norm gains, all drawn
/// from config.seed.
Model build_model(const ModelConfig& config);

/// Parameters owned by a unit. Experts own their two matrices and two
/// biases; a neuron group owns its hidden-dim columns of the input matrix
/// and bias and the matching rows of the output matrix.
std::vector<ParamSlice> unit_parameters(const Model& model, UnitId unit);

/// Xavier bound sqrt(6 / (fan_in + fan_out)).
double xavier_bound(std::size_t fan_in, std::size_t fan_out);

/// Packed sequences for one differentiable forward pass.
struct Batch {
  std::vector<int> inputs;
  std::vector<int> targets;
  std::vector<int> positions;
  std::vector<Segment> segments;
};

/// Packs token sequences (each with <bos> ... <eos>) into one batch. Each
/// sequence of length n contributes n-1 prediction rows.
Batch make_batch(std::span<const std::vector<int>> sequences);

/// Mean next-token cross-entropy of `batch`, recorded on `graph`.
Var forward_loss(Graph& graph, const Model& model, const Batch& batch);

}  // namespace lesionlab
