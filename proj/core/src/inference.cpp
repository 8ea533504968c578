#include "lesionlab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lesionlab/errors.hpp"

namespace lesionlab {

namespace {

constexpr double kGeluC = 0.7978845608028654;
constexpr double kLnEps = 1e-5;

// y = b + x W for a row vector x (W is in x out, row-major).
void affine(const double* x, const Tensor& w, const double* b, double* y) {
  const std::size_t in = w.rows();
  const std::size_t out = w.cols();
  if (b) {
    std::copy(b, b + out, y);
  } else {
    std::fill(y, y + out, 0.0);
  }
  const double* W = w.data();
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wi = W + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xi * wi[j];
  }
}

void layer_norm(const double* x, std::size_t d, const Tensor& g, const Tensor& b, double* y) {
  double mean = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (std::size_t i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<double>(d);
  const double inv = 1.0 / std::sqrt(var + kLnEps);
  for (std::size_t i = 0; i < d; ++i) y[i] = (x[i] - mean) * inv * g[i] + b[i];
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

struct LayerCache {
  std::vector<double> keys;
  std::vector<double> values;
};

/// Resolved per-layer ablation flags.
struct Ablation {
  std::vector<std::vector<std::uint8_t>> off;

  Ablation(const Model& model, const UnitOverrideSet& overrides)
      : off(model.config().layers, std::vector<std::uint8_t>(model.config().units_per_layer(), 0)) {
    auto apply = [&](const UnitId& u) {
      if (!model.has_unit(u)) throw LookupError("unknown unit " + unit_label(u));
      off[u.layer][u.index] = 1;
    };
    for (const auto& u : model.zero_mask()) apply(u);
    for (const auto& u : overrides) apply(u);
  }
};

struct Capture {
  UnitId unit;
  std::vector<double> rows;
};

/// Scratch buffers reused across rows.
class Kernel {
 public:
  explicit Kernel(const Model& model)
      : m_(model),
        cfg_(model.config()),
        h_(cfg_.width),
        q_(cfg_.width),
        att_(cfg_.width),
        tmp_(cfg_.width),
        ffn_(cfg_.width),
        hidden_(cfg_.architecture == Architecture::dense ? cfg_.ffn_hidden : cfg_.expert_hidden),
        logits_(cfg_.architecture == Architecture::moe ? cfg_.experts : 0),
        order_(logits_.size()),
        scores_(cfg_.context_length) {}

  /// One transformer layer for the row at position t. `x` is updated in
  /// place from the layer input to the layer output.
  void layer(std::size_t l, std::size_t t, double* x, LayerCache& cache, const std::vector<std::uint8_t>& off,
             std::uint8_t* routed, Capture* capture) {
    const ParameterStore& ps = m_.params();
    const LayerParams& lp = m_.layer(l);
    const std::size_t d = cfg_.width;

    layer_norm(x, d, ps.tensor(lp.ln1_g), ps.tensor(lp.ln1_b), h_.data());
    affine(h_.data(), ps.tensor(lp.wq), ps.tensor(lp.bq).data(), q_.data());
    cache.keys.resize((t + 1) * d);
    cache.values.resize((t + 1) * d);
    affine(h_.data(), ps.tensor(lp.wk), ps.tensor(lp.bk).data(), cache.keys.data() + t * d);
    affine(h_.data(), ps.tensor(lp.wv), ps.tensor(lp.bv).data(), cache.values.data() + t * d);

    const std::size_t hd = d / cfg_.heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
    std::fill(att_.begin(), att_.end(), 0.0);
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      const std::size_t c0 = h * hd;
      double mx = -1e300;
      for (std::size_t j = 0; j <= t; ++j) {
        const double* kj = cache.keys.data() + j * d + c0;
        double dot = 0.0;
        for (std::size_t c = 0; c < hd; ++c) dot += q_[c0 + c] * kj[c];
        scores_[j] = dot * sc;
        mx = std::max(mx, scores_[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j <= t; ++j) z += (scores_[j] = std::exp(scores_[j] - mx));
      for (std::size_t j = 0; j <= t; ++j) {
        const double p = scores_[j] / z;
        const double* vj = cache.values.data() + j * d + c0;
        for (std::size_t c = 0; c < hd; ++c) att_[c0 + c] += p * vj[c];
      }
    }
    affine(att_.data(), ps.tensor(lp.wo), ps.tensor(lp.bo).data(), tmp_.data());
    for (std::size_t i = 0; i < d; ++i) x[i] += tmp_[i];

    layer_norm(x, d, ps.tensor(lp.ln2_g), ps.tensor(lp.ln2_b), h_.data());
    if (cfg_.architecture == Architecture::dense) {
      dense_ffn(lp, off, capture && capture->unit.layer == l ? capture : nullptr);
    } else {
      moe_ffn(lp, off, routed, capture && capture->unit.layer == l ? capture : nullptr);
    }
    for (std::size_t i = 0; i < d; ++i) x[i] += ffn_[i];
  }

  /// Final layer norm and output projection.
  const std::vector<double>& head(const double* x) {
    const ParameterStore& ps = m_.params();
    layer_norm(x, cfg_.width, ps.tensor(m_.ln_f_g()), ps.tensor(m_.ln_f_b()), h_.data());
    vocab_logits_.resize(cfg_.vocab_size);
    affine(h_.data(), ps.tensor(m_.lm_head()), nullptr, vocab_logits_.data());
    return vocab_logits_;
  }

 private:
  void dense_ffn(const LayerParams& lp, const std::vector<std::uint8_t>& off, Capture* capture) {
    const ParameterStore& ps = m_.params();
    const std::size_t H = cfg_.ffn_hidden;
    const std::size_t w = H / cfg_.groups;
    affine(h_.data(), ps.tensor(lp.ffn_w_in), ps.tensor(lp.ffn_b_in).data(), hidden_.data());
    for (std::size_t j = 0; j < H; ++j) hidden_[j] = off[j / w] ? 0.0 : gelu(hidden_[j]);
    affine(hidden_.data(), ps.tensor(lp.ffn_w_out), nullptr, ffn_.data());
    if (capture) {
      const Tensor& wo = ps.tensor(lp.ffn_w_out);
      std::vector<double> out(cfg_.width, 0.0);
      for (std::size_t j = capture->unit.index * w; j < (capture->unit.index + 1) * w; ++j)
        for (std::size_t c = 0; c < cfg_.width; ++c) out[c] += hidden_[j] * wo.at(j, c);
      capture->rows.insert(capture->rows.end(), out.begin(), out.end());
    }
  }

  void moe_ffn(const LayerParams& lp, const std::vector<std::uint8_t>& off, std::uint8_t* routed, Capture* capture) {
    const ParameterStore& ps = m_.params();
    const std::size_t k = cfg_.active_experts;
    affine(h_.data(), ps.tensor(lp.router), nullptr, logits_.data());
    std::iota(order_.begin(), order_.end(), 0);
    std::partial_sort(order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(k), order_.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (logits_[a] != logits_[b]) return logits_[a] > logits_[b];
                        return a < b;
                      });
    // Softmax over the selected logits, computed before any ablation.
    const double mx = logits_[order_[0]];
    double z = 0.0;
    gates_.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) z += (gates_[i] = std::exp(logits_[order_[i]] - mx));
    for (auto& g : gates_) g /= z;
    if (cfg_.renormalize_ablated_gates) {
      double kept = 0.0;
      bool any_off = false;
      for (std::size_t i = 0; i < k; ++i) {
        if (off[order_[i]]) {
          any_off = true;
        } else {
          kept += gates_[i];
        }
      }
      if (any_off && kept > 0.0)
        for (std::size_t i = 0; i < k; ++i) gates_[i] /= kept;
    }

    std::fill(ffn_.begin(), ffn_.end(), 0.0);
    std::vector<double> captured;
    if (capture) captured.assign(cfg_.width, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t e = order_[i];
      if (routed) routed[e] = 1;
      if (off[e]) continue;
      const auto& ex = lp.experts[e];
      affine(h_.data(), ps.tensor(ex.w_in), ps.tensor(ex.b_in).data(), hidden_.data());
      for (auto& v : hidden_) v = gelu(v);
      affine(hidden_.data(), ps.tensor(ex.w_out), ps.tensor(ex.b_out).data(), tmp_.data());
      for (std::size_t c = 0; c < cfg_.width; ++c) ffn_[c] += gates_[i] * tmp_[c];
      if (capture && capture->unit.index == e)
        for (std::size_t c = 0; c < cfg_.width; ++c) captured[c] = gates_[i] * tmp_[c];
    }
    if (capture) capture->rows.insert(capture->rows.end(), captured.begin(), captured.end());
  }

  const Model& m_;
  const ModelConfig& cfg_;
  std::vector<double> h_, q_, att_, tmp_, ffn_, hidden_, logits_;
  std::vector<std::size_t> order_;
  std::vector<double> gates_;
  std::vector<double> scores_;
  std::vector<double> vocab_logits_;
};

double log_softmax_at(const std::vector<double>& logits, int token) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return logits[static_cast<std::size_t>(token)] - mx - std::log(z);
}

void check_tokens(const Model& model, std::span<const int> tokens, std::size_t min_len) {
  const auto& cfg = model.config();
  if (tokens.size() < min_len) {
    throw InputError("sequence needs at least " + std::to_string(min_len) + " tokens, got " +
                     std::to_string(tokens.size()));
  }
  if (tokens.size() > cfg.context_length) {
    throw InputError("sequence of " + std::to_string(tokens.size()) + " tokens exceeds context length " +
                     std::to_string(cfg.context_length));
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
      throw InputError("token id " + std::to_string(t) + " out of vocabulary of size " +
                       std::to_string(cfg.vocab_size));
    }
  }
}

/// Layer-major pass over layers [from, L) starting from residual rows `x`.
void run_layers(const Model& model, std::size_t from, std::vector<double>& x, std::size_t n, const Ablation& abl,
                ForwardTrace* trace, Capture* capture) {
  const auto& cfg = model.config();
  const std::size_t d = cfg.width;
  Kernel kernel(model);
  LayerCache cache;
  for (std::size_t l = from; l < cfg.layers; ++l) {
    if (trace) trace->residual[l] = x;
    cache.keys.clear();
    cache.values.clear();
    std::uint8_t* routed = nullptr;
    if (trace && cfg.architecture == Architecture::moe) {
      trace->routed[l].assign(n * cfg.experts, 0);
      routed = trace->routed[l].data();
    }
    for (std::size_t t = 0; t < n; ++t) {
      kernel.layer(l, t, x.data() + t * d, cache, abl.off[l], routed ? routed + t * cfg.experts : nullptr,
                   capture);
    }
  }
  if (trace) trace->residual[cfg.layers] = x;
}

std::vector<double> embed(const Model& model, std::span<const int> tokens) {
  const auto& cfg = model.config();
  const std::size_t d = cfg.width;
  const Tensor& te = model.params().tensor(model.tok_emb());
  const Tensor& pe = model.params().tensor(model.pos_emb());
  std::vector<double> x(tokens.size() * d);
  for (std::size_t t = 0; t < tokens.size(); ++t)
    for (std::size_t c = 0; c < d; ++c)
      x[t * d + c] = te.at(static_cast<std::size_t>(tokens[t]), c) + pe.at(t, c);
  return x;
}

std::vector<double> score_positions(const Model& model, std::span<const int> tokens, const std::vector<double>& x) {
  Kernel kernel(model);
  const std::size_t d = model.config().width;
  std::vector<double> lp;
  lp.reserve(tokens.size() - 1);
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    lp.push_back(log_softmax_at(kernel.head(x.data() + t * d), tokens[t + 1]));
  }
  return lp;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double ForwardTrace::avg_log_prob() const {
  if (log_probs.empty()) throw UsageError("trace has no scored positions");
  return mean(log_probs);
}

bool ForwardTrace::expert_routed(std::size_t layer, std::size_t expert) const {
  const auto& r = routed.at(layer);
  if (r.empty()) return true;
  const std::size_t E = r.size() / length;
  for (std::size_t t = 0; t < length; ++t)
    if (r[t * E + expert]) return true;
  return false;
}

ForwardTrace trace_sequence(const Model& model, std::span<const int> tokens, const UnitOverrideSet& overrides) {
  check_tokens(model, tokens, 2);
  const Ablation abl(model, overrides);
  ForwardTrace trace;
  trace.length = tokens.size();
  trace.residual.resize(model.config().layers + 1);
  trace.routed.resize(model.config().layers);
  std::vector<double> x = embed(model, tokens);
  run_layers(model, 0, x, tokens.size(), abl, &trace, nullptr);
  trace.log_probs = score_positions(model, tokens, x);
  return trace;
}

double avg_log_prob(const Model& model, std::span<const int> tokens, const UnitOverrideSet& overrides) {
  check_tokens(model, tokens, 2);
  const Ablation abl(model, overrides);
  std::vector<double> x = embed(model, tokens);
  run_layers(model, 0, x, tokens.size(), abl, nullptr, nullptr);
  return mean(score_positions(model, tokens, x));
}

double avg_log_prob_resumed(const Model& model, std::span<const int> tokens, const ForwardTrace& base,
                            const UnitOverrideSet& extra) {
  if (base.length != tokens.size()) throw UsageError("trace does not match the token sequence");
  if (extra.empty()) return base.avg_log_prob();
  const bool moe = model.config().architecture == Architecture::moe;
  bool any_routed = !moe;
  std::size_t from = model.config().layers;
  for (const auto& u : extra) {
    if (!model.has_unit(u)) throw LookupError("unknown unit " + unit_label(u));
    from = std::min<std::size_t>(from, u.layer);
    if (moe && base.expert_routed(u.layer, u.index)) any_routed = true;
  }
  if (!any_routed) return base.avg_log_prob();
  // The trace already reflects the model's permanent mask; the ablation
  // below combines it with the extra units.
  const Ablation abl(model, extra);
  std::vector<double> x = base.residual.at(from);
  run_layers(model, from, x, tokens.size(), abl, nullptr, nullptr);
  return mean(score_positions(model, tokens, x));
}

std::vector<int> generate(const Model& model, std::span<const int> prompt, std::size_t max_new_tokens,
                          const UnitOverrideSet& overrides) {
  check_tokens(model, prompt, 1);
  const auto& cfg = model.config();
  std::vector<int> out(prompt.begin(), prompt.end());
  if (max_new_tokens == 0) return out;
  const Ablation abl(model, overrides);
  const std::size_t d = cfg.width;
  const int eos = 2;
  Kernel kernel(model);
  std::vector<LayerCache> caches(cfg.layers);
  std::vector<double> x(d);
  const Tensor& te = model.params().tensor(model.tok_emb());
  const Tensor& pe = model.params().tensor(model.pos_emb());

  std::size_t produced = 0;
  for (std::size_t t = 0;; ++t) {
    const auto tok = static_cast<std::size_t>(out[t]);
    for (std::size_t c = 0; c < d; ++c) x[c] = te.at(tok, c) + pe.at(t, c);
    for (std::size_t l = 0; l < cfg.layers; ++l) kernel.layer(l, t, x.data(), caches[l], abl.off[l], nullptr, nullptr);
    if (t + 1 < out.size()) continue;
    const auto& logits = kernel.head(x.data());
    const int next = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (next == eos) break;
    out.push_back(next);
    if (++produced >= max_new_tokens || out.size() >= cfg.context_length) break;
  }
  return out;
}

std::vector<double> capture_unit_output(const Model& model, std::span<const int> tokens, UnitId unit,
                                        const UnitOverrideSet& overrides) {
  check_tokens(model, tokens, 1);
  if (!model.has_unit(unit)) throw LookupError("unknown unit " + unit_label(unit));
  const Ablation abl(model, overrides);
  Capture capture{unit, {}};
  std::vector<double> x = embed(model, tokens);
  run_layers(model, 0, x, tokens.size(), abl, nullptr, &capture);
  return capture.rows;
}

std::vector<double> next_token_logits(const Model& model, std::span<const int> tokens,
                                      const UnitOverrideSet& overrides) {
  check_tokens(model, tokens, 1);
  const Ablation abl(model, overrides);
  std::vector<double> x = embed(model, tokens);
  run_layers(model, 0, x, tokens.size(), abl, nullptr, nullptr);
  Kernel kernel(model);
  return kernel.head(x.data() + (tokens.size() - 1) * model.config().width);
}

}  // namespace lesionlab
