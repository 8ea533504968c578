#include "lesionlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lesionlab/errors.hpp"

namespace lesionlab {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) {
    throw ConfigError(std::string(op) + " shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                      shape_to_string(b.shape()));
  }
}

std::vector<std::size_t> topk_indices(std::span<const double> row, std::size_t k) {
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (row[a] != row[b]) return row[a] > row[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

}  // namespace

Var Graph::push(Tensor value, std::vector<std::uint32_t> inputs, const char* op,
                std::function<void(Graph&, std::uint32_t)> backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite output from ") + op);
  }
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (auto in : n.inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Graph::Node& Graph::node(Var v) {
  if (v.id >= nodes_.size()) throw UsageError("variable does not belong to this graph");
  return nodes_[v.id];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw UsageError("variable does not belong to this graph");
  return nodes_[v.id];
}

const Tensor& Graph::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const Tensor& Graph::value(Var v) const {
  node(v);
  return val(v.id);
}

Tensor& Graph::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(val(id).shape());
  return n.grad;
}

Var Graph::parameter(ParamId id, const Tensor& value) {
  Node n;
  n.external = &value;
  n.requires_grad = true;
  n.is_parameter = true;
  n.param = id;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Tensor out = lesionlab::matmul(A, B);
  return push(std::move(out), {a.id, b.id}, "matmul", [a, b](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& A = g.val(a.id);
    const Tensor& B = g.val(b.id);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (g.needs_grad(a.id)) {
      Tensor& dA = g.grad(a.id);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        double* darow = dA.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          darow[p] += acc;
        }
      }
    }
    if (g.needs_grad(b.id)) {
      Tensor& dB = g.grad(b.id);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        const double* arow = A.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = arow[p];
          double* dbrow = dB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  const bool broadcast = A.shape() != B.shape();
  require(!broadcast || (B.rank() == 1 && B.size() == A.cols()), "add", A, B);
  Tensor out = A;
  const std::size_t n = A.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += broadcast ? B[i % n] : B[i];
  return push(std::move(out), {a.id, b.id}, "add", [a, b, broadcast](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs_grad(a.id)) {
      Tensor& dA = g.grad(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i];
    }
    if (g.needs_grad(b.id)) {
      Tensor& dB = g.grad(b.id);
      const std::size_t n = dB.size();
      for (std::size_t i = 0; i < G.size(); ++i) dB[broadcast ? i % n : i] += G[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.shape() == B.shape(), "mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return push(std::move(out), {a.id, b.id}, "mul", [a, b](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs_grad(a.id)) {
      Tensor& dA = g.grad(a.id);
      const Tensor& B = g.val(b.id);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * B[i];
    }
    if (g.needs_grad(b.id)) {
      Tensor& dB = g.grad(b.id);
      const Tensor& A = g.val(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) dB[i] += G[i] * A[i];
    }
  });
}

Var Graph::scale(Var a, double factor) {
  Tensor out = value(a);
  for (double& v : out.values()) v *= factor;
  return push(std::move(out), {a.id}, "scale", [a, factor](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    Tensor& dA = g.grad(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * factor;
  });
}

Var Graph::gelu(Var a) {
  Tensor out = value(a);
  for (double& x : out.values()) x = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
  return push(std::move(out), {a.id}, "gelu", [a](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& X = g.val(a.id);
    Tensor& dA = g.grad(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) {
      const double x = X[i];
      const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
      const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
      dA[i] += G[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
    }
  });
}

Var Graph::softmax(Var a) {
  Tensor out = value(a);
  const std::size_t n = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - mx));
    for (double& v : row) v /= z;
  }
  return push(std::move(out), {a.id}, "softmax", [a, n](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& Y = g.nodes_[self].value;
    Tensor& dA = g.grad(a.id);
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += G.at(r, j) * Y.at(r, j);
      for (std::size_t j = 0; j < n; ++j) dA.at(r, j) += Y.at(r, j) * (G.at(r, j) - dot);
    }
  });
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = value(x);
  const Tensor& Gm = value(gain);
  const Tensor& Bt = value(bias);
  const std::size_t n = X.cols();
  require(Gm.size() == n && Bt.size() == n, "layer_norm", X, Gm);
  Tensor out(X.shape());
  Tensor xhat(X.shape());
  std::vector<double> rstd(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto xr = X.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xr[j] - mean) * rstd[r];
      xhat.at(r, j) = h;
      out.at(r, j) = h * Gm[j] + Bt[j];
    }
  }
  return push(std::move(out), {x.id, gain.id, bias.id}, "layer_norm",
              [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd), n](Graph& g,
                                                                                 std::uint32_t self) {
                const Tensor& G = g.nodes_[self].grad;
                const Tensor& Gm = g.val(gain.id);
                if (g.needs_grad(gain.id)) {
                  Tensor& dg = g.grad(gain.id);
                  for (std::size_t r = 0; r < G.rows(); ++r)
                    for (std::size_t j = 0; j < n; ++j) dg[j] += G.at(r, j) * xhat.at(r, j);
                }
                if (g.needs_grad(bias.id)) {
                  Tensor& db = g.grad(bias.id);
                  for (std::size_t r = 0; r < G.rows(); ++r)
                    for (std::size_t j = 0; j < n; ++j) db[j] += G.at(r, j);
                }
                if (g.needs_grad(x.id)) {
                  Tensor& dx = g.grad(x.id);
                  const double inv_n = 1.0 / static_cast<double>(n);
                  for (std::size_t r = 0; r < G.rows(); ++r) {
                    double sum_d = 0.0, sum_dx = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                      const double d = G.at(r, j) * Gm[j];
                      sum_d += d;
                      sum_dx += d * xhat.at(r, j);
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                      const double d = G.at(r, j) * Gm[j];
                      dx.at(r, j) += rstd[r] * (d - inv_n * sum_d - xhat.at(r, j) * inv_n * sum_dx);
                    }
                  }
                }
              });
}

Var Graph::embedding(Var table, std::span<const int> ids) {
  const Tensor& T = value(table);
  const std::size_t d = T.cols();
  Tensor out = Tensor::matrix(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= T.rows()) {
      throw InputError("embedding index " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(T.rows()) + " rows");
    }
    std::copy_n(T.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return push(std::move(out), {table.id}, "embedding", [table, idv = std::move(idv), d](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    Tensor& dT = g.grad(table.id);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      double* dst = dT.data() + static_cast<std::size_t>(idv[i]) * d;
      const double* src = G.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var Graph::cross_entropy(Var logits, std::span<const int> targets) {
  const Tensor& L = value(logits);
  if (L.rank() != 2 || L.rows() != targets.size()) {
    throw ConfigError("cross_entropy shape mismatch: logits " + shape_to_string(L.shape()) + " vs " +
                      std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = L.rows(), v = L.cols();
  Tensor probs(L.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v) {
      throw InputError("cross_entropy target " + std::to_string(targets[r]) + " out of range");
    }
    auto lr = L.row(r);
    const double mx = *std::max_element(lr.begin(), lr.end());
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += (probs.at(r, j) = std::exp(lr[j] - mx));
    for (std::size_t j = 0; j < v; ++j) probs.at(r, j) /= z;
    total += (std::log(z) + mx) - lr[static_cast<std::size_t>(targets[r])];
  }
  std::vector<int> tv(targets.begin(), targets.end());
  return push(Tensor::scalar(total / static_cast<double>(n)), {logits.id}, "cross_entropy",
              [logits, probs = std::move(probs), tv = std::move(tv), n, v](Graph& g, std::uint32_t self) {
                const double up = g.nodes_[self].grad[0] / static_cast<double>(n);
                Tensor& dL = g.grad(logits.id);
                for (std::size_t r = 0; r < n; ++r) {
                  for (std::size_t j = 0; j < v; ++j) dL.at(r, j) += up * probs.at(r, j);
                  dL.at(r, static_cast<std::size_t>(tv[r])) -= up;
                }
              });
}

Var Graph::topk_gates(Var logits, std::size_t k) {
  const Tensor& L = value(logits);
  const std::size_t e = L.cols();
  if (k < 1 || k > e) throw ConfigError("topk_gates requires 1 <= k <= " + std::to_string(e));
  Tensor out(L.shape());
  std::vector<std::size_t> selected;
  selected.reserve(L.rows() * k);
  for (std::size_t r = 0; r < L.rows(); ++r) {
    auto row = L.row(r);
    auto idx = topk_indices(row, k);
    double mx = row[idx[0]];
    double z = 0.0;
    for (auto j : idx) z += std::exp(row[j] - mx);
    for (auto j : idx) {
      out.at(r, j) = std::exp(row[j] - mx) / z;
      selected.push_back(j);
    }
  }
  return push(std::move(out), {logits.id}, "topk_gates",
              [logits, selected = std::move(selected), k](Graph& g, std::uint32_t self) {
                const Tensor& G = g.nodes_[self].grad;
                const Tensor& Y = g.nodes_[self].value;
                Tensor& dL = g.grad(logits.id);
                for (std::size_t r = 0; r < Y.rows(); ++r) {
                  const std::size_t* sel = selected.data() + r * k;
                  double dot = 0.0;
                  for (std::size_t i = 0; i < k; ++i) dot += G.at(r, sel[i]) * Y.at(r, sel[i]);
                  for (std::size_t i = 0; i < k; ++i)
                    dL.at(r, sel[i]) += Y.at(r, sel[i]) * (G.at(r, sel[i]) - dot);
                }
              });
}

Var Graph::sum(Var a) {
  const Tensor& A = value(a);
  double s = 0.0;
  for (double v : A.values()) s += v;
  return push(Tensor::scalar(s), {a.id}, "sum", [a](Graph& g, std::uint32_t self) {
    const double up = g.nodes_[self].grad[0];
    Tensor& dA = g.grad(a.id);
    for (double& v : dA.values()) v += up;
  });
}

Var Graph::gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& A = value(a);
  const std::size_t d = A.cols();
  if (rows.empty()) throw ConfigError("gather_rows requires at least one row");
  Tensor out = Tensor::matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) throw ConfigError("gather_rows index out of range");
    std::copy_n(A.data() + rows[i] * d, d, out.data() + i * d);
  }
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  return push(std::move(out), {a.id}, "gather_rows", [a, rv = std::move(rv), d](Graph& g, std::uint32_t self) {
    const Tensor& G = g.nodes_[self].grad;
    Tensor& dA = g.grad(a.id);
    for (std::size_t i = 0; i < rv.size(); ++i) {
      double* dst = dA.data() + rv[i] * d;
      const double* src = G.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var Graph::scale_rows_by_gate(Var a, Var gates, std::span<const std::size_t> rows, std::size_t column) {
  const Tensor& A = value(a);
  const Tensor& Gt = value(gates);
  if (A.rows() != rows.size() || column >= Gt.cols()) {
    throw ConfigError("scale_rows_by_gate shape mismatch: " + shape_to_string(A.shape()) + " vs " +
                      shape_to_string(Gt.shape()));
  }
  Tensor out = A;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double w = Gt.at(rows[i], column);
    for (double& v : out.row(i)) v *= w;
  }
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  return push(std::move(out), {a.id, gates.id}, "scale_rows_by_gate",
              [a, gates, rv = std::move(rv), column](Graph& g, std::uint32_t self) {
                const Tensor& G = g.nodes_[self].grad;
                const std::size_t d = G.cols();
                if (g.needs_grad(a.id)) {
                  const Tensor& Gt = g.val(gates.id);
                  Tensor& dA = g.grad(a.id);
                  for (std::size_t i = 0; i < rv.size(); ++i) {
                    const double w = Gt.at(rv[i], column);
                    for (std::size_t j = 0; j < d; ++j) dA.at(i, j) += G.at(i, j) * w;
                  }
                }
                if (g.needs_grad(gates.id)) {
                  const Tensor& A = g.val(a.id);
                  Tensor& dG = g.grad(gates.id);
                  for (std::size_t i = 0; i < rv.size(); ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < d; ++j) dot += G.at(i, j) * A.at(i, j);
                    dG.at(rv[i], column) += dot;
                  }
                }
              });
}

Var Graph::scatter_sum(std::size_t n_rows, std::size_t cols,
                       std::span<const std::pair<Var, std::vector<std::size_t>>> parts) {
  Tensor out = Tensor::matrix(n_rows, cols);
  std::vector<std::uint32_t> inputs;
  std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>> routes;
  for (const auto& [var, rows] : parts) {
    const Tensor& P = value(var);
    if (P.rows() != rows.size() || P.cols() != cols) {
      throw ConfigError("scatter_sum part shape " + shape_to_string(P.shape()) + " does not match " +
                        std::to_string(rows.size()) + " rows x " + std::to_string(cols));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= n_rows) throw ConfigError("scatter_sum row index out of range");
      double* dst = out.data() + rows[i] * cols;
      const double* src = P.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
    inputs.push_back(var.id);
    routes.emplace_back(var.id, rows);
  }
  return push(std::move(out), std::move(inputs), "scatter_sum",
              [routes = std::move(routes), cols](Graph& g, std::uint32_t self) {
                const Tensor& G = g.nodes_[self].grad;
                for (const auto& [id, rows] : routes) {
                  if (!g.needs_grad(id)) continue;
                  Tensor& dP = g.grad(id);
                  for (std::size_t i = 0; i < rows.size(); ++i) {
                    const double* src = G.data() + rows[i] * cols;
                    double* dst = dP.data() + i * cols;
                    for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
                  }
                }
              });
}

Var Graph::causal_attention(Var q, Var k, Var v, std::size_t heads, std::span<const Segment> segments) {
  const Tensor& Q = value(q);
  const Tensor& K = value(k);
  const Tensor& V = value(v);
  require(Q.shape() == K.shape() && Q.shape() == V.shape(), "causal_attention", Q, K);
  const std::size_t d = Q.cols();
  if (heads == 0 || d % heads != 0) throw ConfigError("attention width must be divisible by heads");
  const std::size_t hd = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
  std::size_t covered = 0;
  for (const auto& s : segments) {
    if (s.start != covered || s.length == 0) throw ConfigError("attention segments must tile the rows");
    covered += s.length;
  }
  if (covered != Q.rows()) throw ConfigError("attention segments must tile the rows");

  // Probabilities are stored per (segment, head) as lower-triangular blocks.
  std::vector<double> probs;
  std::vector<std::size_t> offsets;
  Tensor out(Q.shape());
  for (const auto& s : segments) {
    for (std::size_t h = 0; h < heads; ++h) {
      offsets.push_back(probs.size());
      const std::size_t c0 = h * hd;
      for (std::size_t i = 0; i < s.length; ++i) {
        const double* qi = Q.data() + (s.start + i) * d + c0;
        const std::size_t base = probs.size();
        double mx = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
          const double* kj = K.data() + (s.start + j) * d + c0;
          double dot = 0.0;
          for (std::size_t c = 0; c < hd; ++c) dot += qi[c] * kj[c];
          dot *= sc;
          probs.push_back(dot);
          mx = std::max(mx, dot);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) z += (probs[base + j] = std::exp(probs[base + j] - mx));
        double* oi = out.data() + (s.start + i) * d + c0;
        for (std::size_t j = 0; j <= i; ++j) {
          const double p = (probs[base + j] /= z);
          const double* vj = V.data() + (s.start + j) * d + c0;
          for (std::size_t c = 0; c < hd; ++c) oi[c] += p * vj[c];
        }
      }
    }
  }
  std::vector<Segment> segs(segments.begin(), segments.end());
  return push(std::move(out), {q.id, k.id, v.id}, "causal_attention",
              [q, k, v, heads, hd, d, sc, segs = std::move(segs), probs = std::move(probs),
               offsets = std::move(offsets)](Graph& g, std::uint32_t self) {
                const Tensor& G = g.nodes_[self].grad;
                const Tensor& Q = g.val(q.id);
                const Tensor& K = g.val(k.id);
                const Tensor& V = g.val(v.id);
                Tensor& dQ = g.grad(q.id);
                Tensor& dK = g.grad(k.id);
                Tensor& dV = g.grad(v.id);
                std::vector<double> dp;
                std::size_t block = 0;
                for (const auto& s : segs) {
                  for (std::size_t h = 0; h < heads; ++h, ++block) {
                    const std::size_t c0 = h * hd;
                    std::size_t off = offsets[block];
                    for (std::size_t i = 0; i < s.length; ++i) {
                      const double* p = probs.data() + off;
                      const double* gi = G.data() + (s.start + i) * d + c0;
                      dp.assign(i + 1, 0.0);
                      double dot = 0.0;
                      for (std::size_t j = 0; j <= i; ++j) {
                        const double* vj = V.data() + (s.start + j) * d + c0;
                        double* dvj = dV.data() + (s.start + j) * d + c0;
                        double acc = 0.0;
                        for (std::size_t c = 0; c < hd; ++c) {
                          acc += gi[c] * vj[c];
                          dvj[c] += p[j] * gi[c];
                        }
                        dp[j] = acc;
                        dot += acc * p[j];
                      }
                      const double* qi = Q.data() + (s.start + i) * d + c0;
                      double* dqi = dQ.data() + (s.start + i) * d + c0;
                      for (std::size_t j = 0; j <= i; ++j) {
                        const double ds = p[j] * (dp[j] - dot) * sc;
                        const double* kj = K.data() + (s.start + j) * d + c0;
                        double* dkj = dK.data() + (s.start + j) * d + c0;
                        for (std::size_t c = 0; c < hd; ++c) {
                          dqi[c] += ds * kj[c];
                          dkj[c] += ds * qi[c];
                        }
                      }
                      off += i + 1;
                    }
                  }
                }
              });
}

Gradients Graph::backward(Var loss) {
  if (differentiated_) throw UsageError("backward already ran on this graph; call reset() first");
  const Tensor& L = value(loss);
  if (L.size() != 1) throw UsageError("backward requires a scalar loss, got " + shape_to_string(L.shape()));
  differentiated_ = true;

  if (nodes_[loss.id].requires_grad) {
    grad(loss.id)[0] = 1.0;
    for (std::int64_t i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, static_cast<std::uint32_t>(i));
    }
  }

  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.is_parameter) continue;
    auto it = out.find(n.param);
    if (it == out.end()) {
      out.emplace(n.param, n.grad.size() ? std::move(n.grad) : Tensor(n.external->shape()));
    } else if (n.grad.size()) {
      for (std::size_t j = 0; j < n.grad.size(); ++j) it->second[j] += n.grad[j];
    }
  }
  return out;
}

void Graph::reset() {
  nodes_.clear();
  differentiated_ = false;
}

}  // namespace lesionlab
