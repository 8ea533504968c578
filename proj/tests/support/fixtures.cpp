#include "fixtures.hpp"

#include <cmath>

#include "lesionlab/autodiff.hpp"
#include "lesionlab/vocab.hpp"

namespace lesionlab::fixtures {

ModelConfig tiny_config(Architecture arch, std::uint64_t seed) {
  ModelConfig c;
  c.architecture = arch;
  c.vocab_size = Vocabulary::standard().size();
  c.context_length = 16;
  c.width = 8;
  c.layers = 2;
  c.heads = 2;
  c.ffn_hidden = 8;
  c.groups = 4;
  c.experts = 4;
  c.active_experts = 2;
  c.expert_hidden = 4;
  c.seed = seed;
  return c;
}

Model tiny_model(Architecture arch, std::uint64_t seed) { return build_model(tiny_config(arch, seed)); }

std::vector<int> sequence(const std::string& text) {
  return Vocabulary::standard().encode_sequence(split_words(text));
}

std::vector<std::vector<int>> six_sequences() {
  std::vector<std::vector<int>> out;
  for (const char* s : {"boy eating apple", "girl run", "dog ball", "the cat sleeps", "king see queen", "bird sing"})
    out.push_back(sequence(s));
  return out;
}

FinetuneConfig two_step_sgd() {
  FinetuneConfig c;
  c.epochs = 1;
  c.batch_size = 3;
  c.optimizer.rule = UpdateRule::sgd;
  c.optimizer.learning_rate = 0.05;
  c.optimizer.weight_decay = 0.0;
  c.seed = 77;
  return c;
}

std::vector<double> replay_importance(Model model, std::span<const std::vector<int>> seqs,
                                      const FinetuneConfig& config, std::vector<Tensor>& importance) {
  importance.clear();
  for (ParamId id = 0; id < model.params().size(); ++id) importance.emplace_back(model.params().tensor(id).shape());
  std::vector<double> losses;
  for (const auto& batch_idx : finetune_batches(seqs.size(), config)) {
    std::vector<std::vector<int>> batch;
    for (auto i : batch_idx) batch.push_back(seqs[i]);
    Graph g;
    const Var loss = forward_loss(g, model, make_batch(batch));
    losses.push_back(g.value(loss).item());
    Gradients grads = g.backward(loss);
    for (const UnitId& u : config.frozen)
      for (const auto& s : unit_parameters(model, u))
        if (grads.contains(s.param))
          s.for_each(grads.at(s.param), [&](std::size_t i) { grads.at(s.param)[i] = 0.0; });
    for (auto& [id, grad] : grads) {
      Tensor& w = model.params().tensor(id);
      for (std::size_t i = 0; i < w.size(); ++i) {
        importance[id][i] += std::abs(grad[i] * w[i]);
        w[i] -= config.optimizer.learning_rate * grad[i];
      }
    }
  }
  return losses;
}

double replay_unit_score(const Model& model, const std::vector<Tensor>& importance, UnitId unit) {
  const auto& p = model.params();
  double total = 0.0;
  if (unit.kind == UnitKind::expert) {
    const std::string prefix = "layers." + std::to_string(unit.layer) + ".experts." + std::to_string(unit.index) + ".";
    for (const char* name : {"w_in", "b_in", "w_out", "b_out"})
      for (double v : importance[p.id(prefix + name)].values()) total += v;
    return total;
  }
  const std::string prefix = "layers." + std::to_string(unit.layer) + ".ffn.";
  const Tensor& w_in = importance[p.id(prefix + "w_in")];
  const Tensor& b_in = importance[p.id(prefix + "b_in")];
  const Tensor& w_out = importance[p.id(prefix + "w_out")];
  const std::size_t width = model.config().ffn_hidden / model.config().groups;
  const std::size_t lo = unit.index * width, hi = lo + width;
  for (std::size_t r = 0; r < w_in.rows(); ++r)
    for (std::size_t c = lo; c < hi; ++c) total += w_in.at(r, c);
  for (std::size_t c = lo; c < hi; ++c) total += b_in[c];
  for (std::size_t r = lo; r < hi; ++r)
    for (std::size_t c = 0; c < w_out.cols(); ++c) total += w_out.at(r, c);
  return total;
}

namespace {

constexpr std::size_t kWidth = 4;
constexpr std::size_t kHidden = 2;

}  // namespace

Model agreement_model() {
  const Vocabulary& vocab = Vocabulary::standard();
  const std::size_t V = vocab.size();
  ModelConfig c;
  c.architecture = Architecture::moe;
  c.vocab_size = V;
  c.context_length = 8;
  c.width = kWidth;
  c.layers = 1;
  c.heads = 1;
  c.experts = 2;
  c.active_experts = 1;
  c.expert_hidden = kHidden;

  // Residual dims: 0 and 2 carry the noun code, 1 receives the expert's
  // plural signal, 3 stays zero and feeds a constant through ln_f.b.
  ParameterStore s;
  Tensor tok({V, kWidth});
  for (const char* w : {"dog", "cat"}) {
    const auto id = static_cast<std::size_t>(vocab.id(w));
    tok.at(id, 0) = 1.0;
    tok.at(id, 1) = -1.0;
  }
  for (const char* w : {"dogs", "cats"}) {
    const auto id = static_cast<std::size_t>(vocab.id(w));
    tok.at(id, 0) = 1.0;
    tok.at(id, 2) = -1.0;
  }
  s.add("tok_emb", tok);
  s.add("pos_emb", Tensor({c.context_length, kWidth}));
  s.add("layers.0.ln1.g", Tensor({kWidth}, 1.0));
  s.add("layers.0.ln1.b", Tensor({kWidth}));
  for (const char* w : {"q", "k", "v", "o"}) {
    s.add(std::string("layers.0.attn.w") + w, Tensor({kWidth, kWidth}));
    s.add(std::string("layers.0.attn.b") + w, Tensor({kWidth}));
  }
  s.add("layers.0.ln2.g", Tensor({kWidth}, 1.0));
  s.add("layers.0.ln2.b", Tensor({kWidth}));
  s.add("layers.0.router.w", Tensor({kWidth, 2}));  // all-zero logits: ties go to expert 0

  Tensor w_in({kWidth, kHidden});
  w_in.at(2, 0) = -2.0;  // fires on the plural code
  Tensor w_out({kHidden, kWidth});
  w_out.at(0, 1) = 1.0;
  s.add("layers.0.experts.0.w_in", w_in);
  s.add("layers.0.experts.0.b_in", Tensor({kHidden}));
  s.add("layers.0.experts.0.w_out", w_out);
  s.add("layers.0.experts.0.b_out", Tensor({kWidth}));
  s.add("layers.0.experts.1.w_in", Tensor({kWidth, kHidden}));
  s.add("layers.0.experts.1.b_in", Tensor({kHidden}));
  s.add("layers.0.experts.1.w_out", Tensor({kHidden, kWidth}));
  s.add("layers.0.experts.1.b_out", Tensor({kWidth}));

  s.add("ln_f.g", Tensor({kWidth}, {1.0, 1.0, 1.0, 0.0}));
  s.add("ln_f.b", Tensor({kWidth}, {0.0, 0.0, 0.0, 1.0}));
  Tensor head({kWidth, V});
  head.at(3, static_cast<std::size_t>(vocab.id("runs"))) = 1.0;
  head.at(1, static_cast<std::size_t>(vocab.id("run"))) = 2.0;
  s.add("lm_head.w", head);
  return Model(c, std::move(s));
}

Task agreement_task() {
  Task t{"agreement", {}};
  for (const auto& [good, bad] : std::vector<std::pair<std::string, std::string>>{
           {"the dog runs", "the dog run"},
           {"the cat runs", "the cat run"},
           {"the dogs run", "the dogs runs"},
           {"the cats run", "the cats runs"},
       })
    t.pairs.emplace_back(sequence(good), sequence(bad));
  return t;
}

namespace {

std::vector<double> layer_norm(const std::vector<double>& x, const Tensor& g, const Tensor& b) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * g[i] + b[i];
  return out;
}

double gelu(double x) {
  const double c = std::sqrt(2.0 / M_PI);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

}  // namespace

double reference_avg_log_prob(const Model& model, std::span<const int> tokens, bool with_expert) {
  const auto& p = model.params();
  const Tensor& tok = p.tensor(p.id("tok_emb"));
  const Tensor& w_in = p.tensor(p.id("layers.0.experts.0.w_in"));
  const Tensor& b_in = p.tensor(p.id("layers.0.experts.0.b_in"));
  const Tensor& w_out = p.tensor(p.id("layers.0.experts.0.w_out"));
  const Tensor& b_out = p.tensor(p.id("layers.0.experts.0.b_out"));
  const Tensor& head = p.tensor(p.id("lm_head.w"));
  const std::size_t d = tok.cols(), V = head.cols();

  double total = 0.0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    std::vector<double> h(d);
    for (std::size_t i = 0; i < d; ++i) h[i] = tok.at(static_cast<std::size_t>(tokens[t]), i);
    if (with_expert) {
      const auto x = layer_norm(h, p.tensor(p.id("layers.0.ln2.g")), p.tensor(p.id("layers.0.ln2.b")));
      for (std::size_t j = 0; j < w_in.cols(); ++j) {
        double a = b_in[j];
        for (std::size_t i = 0; i < d; ++i) a += x[i] * w_in.at(i, j);
        const double act = gelu(a);
        for (std::size_t i = 0; i < d; ++i) h[i] += act * w_out.at(j, i);
      }
      for (std::size_t i = 0; i < d; ++i) h[i] += b_out[i];
    }
    const auto y = layer_norm(h, p.tensor(p.id("ln_f.g")), p.tensor(p.id("ln_f.b")));
    std::vector<double> logits(V, 0.0);
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t i = 0; i < d; ++i) logits[v] += y[i] * head.at(i, v);
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += logits[static_cast<std::size_t>(tokens[t + 1])] - mx - std::log(z);
  }
  return total / static_cast<double>(tokens.size() - 1);
}

}  // namespace lesionlab::fixtures
