#include "lesionlab/model.hpp"

#include <charconv>
#include <cmath>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/rng.hpp"

namespace lesionlab {

std::string_view architecture_name(Architecture a) { return a == Architecture::moe ? "moe" : "dense"; }

Architecture architecture_from_name(std::string_view name) {
  if (name == "moe") return Architecture::moe;
  if (name == "dense") return Architecture::dense;
  throw ConfigError("unknown architecture '" + std::string(name) + "' (expected dense or moe)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (vocab_size < 4) fail("vocab_size must be >= 4");
  if (context_length < 2) fail("context_length must be >= 2");
  if (width == 0 || layers == 0 || heads == 0) fail("width, layers and heads must be positive");
  if (width % heads != 0) fail("heads must divide width");
  if (architecture == Architecture::moe) {
    if (active_experts < 1 || active_experts >= experts) fail("moe requires 1 <= k < E");
    if (expert_hidden == 0) fail("expert_hidden must be positive");
  } else {
    if (groups == 0 || ffn_hidden == 0) fail("ffn_hidden and groups must be positive");
    if (ffn_hidden % groups != 0) fail("groups must divide ffn_hidden");
  }
}

std::string unit_label(UnitId u) {
  return "L" + std::to_string(u.layer) + (u.kind == UnitKind::expert ? ".E" : ".G") + std::to_string(u.index);
}

UnitId parse_unit_label(std::string_view label) {
  auto bad = [&] { return LookupError("malformed unit label '" + std::string(label) + "'"); };
  if (label.size() < 5 || label[0] != 'L') throw bad();
  const auto dot = label.find('.');
  if (dot == std::string_view::npos || dot + 2 >= label.size()) throw bad();
  UnitId u;
  auto parse = [&](std::string_view s, std::uint32_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) throw bad();
  };
  parse(label.substr(1, dot - 1), u.layer);
  const char kind = label[dot + 1];
  if (kind == 'E') {
    u.kind = UnitKind::expert;
  } else if (kind == 'G') {
    u.kind = UnitKind::neuron_group;
  } else {
    throw bad();
  }
  parse(label.substr(dot + 2), u.index);
  return u;
}

std::size_t ParamSlice::element_count(const Tensor& t) const {
  switch (axis) {
    case SliceAxis::whole: return t.size();
    case SliceAxis::columns: return t.rows() * (end - begin);
    case SliceAxis::rows: return (end - begin) * t.cols();
  }
  return 0;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// ---------------------------------------------------------------------------

Model::Model(ModelConfig config, ParameterStore params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  tok_emb_ = params_.id("tok_emb");
  pos_emb_ = params_.id("pos_emb");
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    LayerParams lp{};
    lp.ln1_g = params_.id(p + "ln1.g");
    lp.ln1_b = params_.id(p + "ln1.b");
    lp.wq = params_.id(p + "attn.wq");
    lp.bq = params_.id(p + "attn.bq");
    lp.wk = params_.id(p + "attn.wk");
    lp.bk = params_.id(p + "attn.bk");
    lp.wv = params_.id(p + "attn.wv");
    lp.bv = params_.id(p + "attn.bv");
    lp.wo = params_.id(p + "attn.wo");
    lp.bo = params_.id(p + "attn.bo");
    lp.ln2_g = params_.id(p + "ln2.g");
    lp.ln2_b = params_.id(p + "ln2.b");
    if (config_.architecture == Architecture::dense) {
      lp.ffn_w_in = params_.id(p + "ffn.w_in");
      lp.ffn_b_in = params_.id(p + "ffn.b_in");
      lp.ffn_w_out = params_.id(p + "ffn.w_out");
    } else {
      lp.router = params_.id(p + "router.w");
      for (std::size_t e = 0; e < config_.experts; ++e) {
        const std::string q = p + "experts." + std::to_string(e) + ".";
        lp.experts.push_back(
            {params_.id(q + "w_in"), params_.id(q + "b_in"), params_.id(q + "w_out"), params_.id(q + "b_out")});
      }
    }
    layers_.push_back(std::move(lp));
  }
  ln_f_g_ = params_.id("ln_f.g");
  ln_f_b_ = params_.id("ln_f.b");
  lm_head_ = params_.id("lm_head.w");
}

std::vector<UnitId> Model::units() const {
  std::vector<UnitId> out;
  const auto kind = config_.architecture == Architecture::moe ? UnitKind::expert : UnitKind::neuron_group;
  for (std::uint32_t l = 0; l < config_.layers; ++l)
    for (std::uint32_t i = 0; i < config_.units_per_layer(); ++i) out.push_back({l, i, kind});
  return out;
}

bool Model::has_unit(UnitId u) const noexcept {
  const auto kind = config_.architecture == Architecture::moe ? UnitKind::expert : UnitKind::neuron_group;
  return u.kind == kind && u.layer < config_.layers && u.index < config_.units_per_layer();
}

void Model::mask_unit(UnitId u) {
  if (!has_unit(u)) throw LookupError("unknown unit " + unit_label(u));
  zero_mask_.insert(u);
}

std::uint64_t Model::fingerprint() const {
  Fingerprint fp;
  fp.text(architecture_name(config_.architecture));
  for (std::size_t v : {config_.vocab_size, config_.context_length, config_.width, config_.layers, config_.heads,
                        config_.ffn_hidden, config_.groups, config_.experts, config_.active_experts,
                        config_.expert_hidden}) {
    fp.u64(v);
  }
  fp.u64(config_.renormalize_ablated_gates ? 1 : 0).u64(config_.seed).u64(params_.checksum());
  for (const auto& u : zero_mask_) fp.text(unit_label(u));
  return fp.value();
}

// ---------------------------------------------------------------------------

Model build_model(const ModelConfig& config) {
  config.validate();
  ParameterStore store;
  auto matrix = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    Rng rng(derive_seed(config.seed, "init", name));
    const double a = xavier_bound(rows, cols);
    Tensor t({rows, cols});
    for (auto& x : t.values()) x = rng.uniform_open(-a, a);
    store.add(name, std::move(t));
  };
  auto vec = [&](const std::string& name, std::size_t n, double fill) { store.add(name, Tensor({n}, fill)); };

  const std::size_t d = config.width;
  matrix("tok_emb", config.vocab_size, d);
  matrix("pos_emb", config.context_length, d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    vec(p + "ln1.g", d, 1.0);
    vec(p + "ln1.b", d, 0.0);
    for (const char* w : {"q", "k", "v", "o"}) {
      matrix(p + "attn.w" + w, d, d);
      vec(p + "attn.b" + w, d, 0.0);
    }
    vec(p + "ln2.g", d, 1.0);
    vec(p + "ln2.b", d, 0.0);
    if (config.architecture == Architecture::dense) {
      matrix(p + "ffn.w_in", d, config.ffn_hidden);
      vec(p + "ffn.b_in", config.ffn_hidden, 0.0);
      matrix(p + "ffn.w_out", config.ffn_hidden, d);
    } else {
      matrix(p + "router.w", d, config.experts);
      for (std::size_t e = 0; e < config.experts; ++e) {
        const std::string q = p + "experts." + std::to_string(e) + ".";
        matrix(q + "w_in", d, config.expert_hidden);
        vec(q + "b_in", config.expert_hidden, 0.0);
        matrix(q + "w_out", config.expert_hidden, d);
        vec(q + "b_out", d, 0.0);
      }
    }
  }
  vec("ln_f.g", d, 1.0);
  vec("ln_f.b", d, 0.0);
  matrix("lm_head.w", d, config.vocab_size);
  return Model(config, std::move(store));
}

std::vector<ParamSlice> unit_parameters(const Model& model, UnitId unit) {
  if (!model.has_unit(unit)) throw LookupError("unknown unit " + unit_label(unit));
  const LayerParams& lp = model.layer(unit.layer);
  if (unit.kind == UnitKind::expert) {
    const auto& e = lp.experts.at(unit.index);
    return {{e.w_in, SliceAxis::whole, 0, 0},
            {e.b_in, SliceAxis::whole, 0, 0},
            {e.w_out, SliceAxis::whole, 0, 0},
            {e.b_out, SliceAxis::whole, 0, 0}};
  }
  const std::size_t w = model.config().ffn_hidden / model.config().groups;
  const std::size_t b = unit.index * w;
  return {{lp.ffn_w_in, SliceAxis::columns, b, b + w},
          {lp.ffn_b_in, SliceAxis::columns, b, b + w},
          {lp.ffn_w_out, SliceAxis::rows, b, b + w}};
}

// ---------------------------------------------------------------------------

Batch make_batch(std::span<const std::vector<int>> sequences) {
  Batch batch;
  for (const auto& seq : sequences) {
    if (seq.size() < 2) throw InputError("training sequences need at least 2 tokens");
    const std::size_t n = seq.size() - 1;
    batch.segments.push_back({batch.inputs.size(), n});
    for (std::size_t i = 0; i < n; ++i) {
      batch.inputs.push_back(seq[i]);
      batch.targets.push_back(seq[i + 1]);
      batch.positions.push_back(static_cast<int>(i));
    }
  }
  if (batch.inputs.empty()) throw InputError("empty batch");
  return batch;
}

Var forward_loss(Graph& g, const Model& model, const Batch& batch) {
  const ModelConfig& cfg = model.config();
  if (!model.zero_mask().empty()) throw UsageError("lesioned models are evaluation-only");
  for (const auto& s : batch.segments) {
    if (s.length > cfg.context_length) {
      throw InputError("sequence of " + std::to_string(s.length) + " rows exceeds context length " +
                       std::to_string(cfg.context_length));
    }
  }
  for (int t : batch.inputs) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) throw InputError("token id out of vocabulary");
  }
  const ParameterStore& ps = model.params();
  auto P = [&](ParamId id) { return g.parameter(id, ps.tensor(id)); };
  const std::size_t n = batch.inputs.size();

  Var x = g.add(g.embedding(P(model.tok_emb()), batch.inputs), g.embedding(P(model.pos_emb()), batch.positions));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const LayerParams& lp = model.layer(l);
    Var h = g.layer_norm(x, P(lp.ln1_g), P(lp.ln1_b));
    Var q = g.add(g.matmul(h, P(lp.wq)), P(lp.bq));
    Var k = g.add(g.matmul(h, P(lp.wk)), P(lp.bk));
    Var v = g.add(g.matmul(h, P(lp.wv)), P(lp.bv));
    Var a = g.causal_attention(q, k, v, cfg.heads, batch.segments);
    x = g.add(x, g.add(g.matmul(a, P(lp.wo)), P(lp.bo)));

    Var h2 = g.layer_norm(x, P(lp.ln2_g), P(lp.ln2_b));
    Var ffn;
    if (cfg.architecture == Architecture::dense) {
      Var hidden = g.gelu(g.add(g.matmul(h2, P(lp.ffn_w_in)), P(lp.ffn_b_in)));
      ffn = g.matmul(hidden, P(lp.ffn_w_out));
    } else {
      Var gates = g.topk_gates(g.matmul(h2, P(lp.router)), cfg.active_experts);
      const Tensor G = g.value(gates);  // copy: the tape grows below
      std::vector<std::pair<Var, std::vector<std::size_t>>> parts;
      for (std::size_t e = 0; e < cfg.experts; ++e) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < n; ++r)
          if (G.at(r, e) > 0.0) rows.push_back(r);
        if (rows.empty()) continue;
        const auto& ex = lp.experts[e];
        Var in = g.gather_rows(h2, rows);
        Var hidden = g.gelu(g.add(g.matmul(in, P(ex.w_in)), P(ex.b_in)));
        Var out = g.add(g.matmul(hidden, P(ex.w_out)), P(ex.b_out));
        parts.emplace_back(g.scale_rows_by_gate(out, gates, rows, e), std::move(rows));
      }
      ffn = g.scatter_sum(n, cfg.width, parts);
    }
    x = g.add(x, ffn);
  }
  Var hf = g.layer_norm(x, P(model.ln_f_g()), P(model.ln_f_b()));
  return g.cross_entropy(g.matmul(hf, P(model.lm_head())), batch.targets);
}

}  // namespace lesionlab
