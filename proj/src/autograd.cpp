#include "matra/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "matra/error.hpp"

namespace matra::nn {

namespace {

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + to_string(t.shape()));
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
}

Graph& graph_of(Var a) {
  if (!a.graph) throw Error("Var is not attached to a graph");
  return *a.graph;
}

// out[m x n] (+)= a[m x k] * b[k x n]
void gemm(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* out_row = out + i * n;
    const double* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) continue;
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
    }
  }
}

// out[m x k] += g[m x n] * b[k x n]^T
void gemm_bt(const double* g, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* g_row = g + i * n;
    double* out_row = out + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* b_row = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g_row[j] * b_row[j];
      out_row[p] += acc;
    }
  }
}

// out[k x n] += a[m x k]^T * g[m x n]
void gemm_at(const double* a, const double* g, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    const double* g_row = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) continue;
      double* out_row = out + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * g_row[j];
    }
  }
}

}  // namespace

const Tensor& Var::value() const { return graph_of(*this).value(*this); }
const Tensor& Var::grad() const { return graph_of(*this).grad(*this); }

Var Graph::constant(Tensor value) {
  nodes_.push_back({std::move(value), nullptr, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(Tensor value) {
  nodes_.push_back({std::move(value), nullptr, {}, record_grad_, {}});
  return {this, nodes_.size() - 1};
}

Var Graph::reference(const Tensor& value, bool requires_grad) {
  nodes_.push_back({{}, &value, {}, requires_grad && record_grad_, {}});
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (!node.requires_grad) throw Error("node " + std::to_string(v.id) + " does not track gradients");
  if (node.grad.empty()) throw Error("backward() has not been run");
  return node.grad;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.get().shape());
  return node.grad;
}

void Graph::record_branches(std::span<const double> inputs) noexcept {
  std::uint64_t h = branch_signature_;
  for (double v : inputs) {
    h ^= v > 0.0 ? 0x9e3779b97f4a7c15ULL : 0x632be59bd9b4e019ULL;
    h *= 0x100000001b3ULL;
  }
  branch_signature_ = h;
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  if (record_grad_) {
    for (Var in : inputs) {
      if (in.graph != this) throw Error("primitive mixes Vars from different graphs");
      needs = needs || nodes_[in.id].requires_grad;
    }
  }
  nodes_.push_back({std::move(value), nullptr, {}, needs, needs ? std::move(backward) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw Error("backward() target belongs to another graph");
  if (nodes_.at(loss.id).get().size() != 1)
    throw ShapeError("backward() needs a one-element tensor, got " + to_string(nodes_[loss.id].get().shape()));
  for (Node& node : nodes_) node.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) throw Error("loss does not depend on any parameter");
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.backward && !node.grad.empty()) node.backward(*this, id);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].requires_grad) grad_buffer(id);
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  if (av.cols() != bv.rows()) mismatch("matmul", av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  gemm(av.data(), bv.data(), out.data(), m, k, n);
  return g.record(std::move(out), {a, b}, [ia = a.id, ib = b.id, m, k, n](Graph& g, std::size_t self) {
    const Tensor& up = g.node_grad(self);
    if (g.requires_grad(ia)) gemm_bt(up.data(), g.node_value(ib).data(), g.grad_buffer(ia).data(), m, k, n);
    if (g.requires_grad(ib)) gemm_at(g.node_value(ia).data(), up.data(), g.grad_buffer(ib).data(), m, k, n);
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool broadcast = av.rank() == 2 && bv.rank() == 1 && bv.size() == av.cols();
  if (!broadcast && av.shape() != bv.shape()) mismatch("add", av, bv);
  Tensor out = av;
  const std::size_t n = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[broadcast ? i % n : i];
  return g.record(std::move(out), {a, b}, [ia = a.id, ib = b.id, broadcast, n](Graph& g, std::size_t self) {
    const Tensor& up = g.node_grad(self);
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < up.size(); ++i) gb[broadcast ? i % n : i] += up[i];
    }
  });
}

Var scale(Var a, double factor) {
  Graph& g = graph_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return g.record(std::move(out), {a}, [ia = a.id, factor](Graph& g, std::size_t self) {
    const Tensor& up = g.node_grad(self);
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += factor * up[i];
  });
}

Var softmax(Var a) {
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  require_matrix("softmax", av);
  Tensor out(av.shape());
  const std::size_t rows = av.rows(), cols = av.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = av.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  return g.record(std::move(out), {a}, [ia = a.id, rows, cols](Graph& g, std::size_t self) {
    const Tensor& y = g.node_value(self);
    const Tensor& up = g.node_grad(self);
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y.data() + r * cols;
      const double* ur = up.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * ur[c];
      double* gr = ga.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gr[c] += yr[c] * (ur[c] - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double epsilon) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  require_matrix("layer_norm", xv);
  if (gv.rank() != 1 || gv.size() != xv.cols()) mismatch("layer_norm", xv, gv);
  if (bv.shape() != gv.shape()) mismatch("layer_norm", gv, bv);
  const std::size_t rows = xv.rows(), cols = xv.cols();

  auto normalized = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    const double s = 1.0 / std::sqrt(var + epsilon);
    (*inv_std)[r] = s;
    auto xh = normalized->row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      xh[c] = (in[c] - mean) * s;
      o[c] = gv[c] * xh[c] + bv[c];
    }
  }
  return g.record(std::move(out), {x, gain, bias},
                  [ix = x.id, igain = gain.id, ibias = bias.id, rows, cols, normalized, inv_std](Graph& g,
                                                                                                 std::size_t self) {
                    const Tensor& up = g.node_grad(self);
                    const Tensor& gv = g.node_value(igain);
                    if (g.requires_grad(igain)) {
                      Tensor& gg = g.grad_buffer(igain);
                      for (std::size_t i = 0; i < up.size(); ++i) gg[i % cols] += up[i] * (*normalized)[i];
                    }
                    if (g.requires_grad(ibias)) {
                      Tensor& gb = g.grad_buffer(ibias);
                      for (std::size_t i = 0; i < up.size(); ++i) gb[i % cols] += up[i];
                    }
                    if (!g.requires_grad(ix)) return;
                    Tensor& gx = g.grad_buffer(ix);
                    std::vector<double> dxh(cols);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double* xh = normalized->data() + r * cols;
                      const double* ur = up.data() + r * cols;
                      double mean_d = 0.0, mean_dx = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) {
                        dxh[c] = ur[c] * gv[c];
                        mean_d += dxh[c];
                        mean_dx += dxh[c] * xh[c];
                      }
                      mean_d /= static_cast<double>(cols);
                      mean_dx /= static_cast<double>(cols);
                      double* gr = gx.data() + r * cols;
                      for (std::size_t c = 0; c < cols; ++c)
                        gr[c] += (*inv_std)[r] * (dxh[c] - mean_d - xh[c] * mean_dx);
                    }
                  });
}

Var relu(Var a) {
  Graph& g = graph_of(a);
  Tensor out = a.value();
  g.record_branches(out.values());
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return g.record(std::move(out), {a}, [ia = a.id](Graph& g, std::size_t self) {
    const Tensor& in = g.node_value(ia);
    const Tensor& up = g.node_grad(self);
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < up.size(); ++i)
      if (in[i] > 0.0) ga[i] += up[i];
  });
}

Var embedding_lookup(Var table, std::span<const std::int32_t> ids) {
  Graph& g = graph_of(table);
  const Tensor& tv = table.value();
  require_matrix("embedding_lookup", tv);
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  const std::size_t cols = tv.cols();
  Tensor out({ids.size(), cols});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows())
      throw ShapeError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table " + to_string(tv.shape()));
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * cols, cols, out.data() + i * cols);
  }
  return g.record(std::move(out), {table},
                  [it = table.id, idx = std::vector<std::int32_t>(ids.begin(), ids.end()), cols](Graph& g,
                                                                                                std::size_t self) {
                    const Tensor& up = g.node_grad(self);
                    Tensor& gt = g.grad_buffer(it);
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      double* dst = gt.data() + static_cast<std::size_t>(idx[i]) * cols;
                      const double* src = up.data() + i * cols;
                      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                    }
                  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Graph& g = graph_of(parts.front());
  const Tensor& first = parts.front().value();
  require_matrix("concat", first);
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = p.value();
    require_matrix("concat", t);
    if (axis == 0 ? t.cols() != first.cols() : t.rows() != first.rows()) mismatch("concat", first, t);
    extents.push_back(axis == 0 ? t.rows() : t.cols());
    total += extents.back();
  }
  const std::size_t rows = axis == 0 ? total : first.rows();
  const std::size_t cols = axis == 0 ? first.cols() : total;
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = parts[k].value();
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c)
        (axis == 0 ? out.at(offset + r, c) : out.at(r, offset + c)) = t.at(r, c);
    offset += extents[k];
  }
  std::vector<std::size_t> ids;
  for (Var p : parts) ids.push_back(p.id);
  return g.record(std::move(out), parts, [ids, extents, axis](Graph& g, std::size_t self) {
    const Tensor& up = g.node_grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (g.requires_grad(ids[k])) {
        Tensor& gk = g.grad_buffer(ids[k]);
        for (std::size_t r = 0; r < gk.rows(); ++r)
          for (std::size_t c = 0; c < gk.cols(); ++c)
            gk.at(r, c) += axis == 0 ? up.at(offset + r, c) : up.at(r, offset + c);
      }
      offset += extents[k];
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  require_matrix("slice", av);
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? av.rows() : av.cols();
  if (begin >= end || end > extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                     to_string(av.shape()));
  const std::size_t rows = axis == 0 ? end - begin : av.rows();
  const std::size_t cols = axis == 0 ? av.cols() : end - begin;
  const std::size_t r0 = axis == 0 ? begin : 0, c0 = axis == 0 ? 0 : begin;
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = av.at(r0 + r, c0 + c);
  return g.record(std::move(out), {a}, [ia = a.id, r0, c0, rows, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.node_grad(self);
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga.at(r0 + r, c0 + c) += up.at(r, c);
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  require_matrix("transpose", av);
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out({cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(c, r) = av.at(r, c);
  return g.record(std::move(out), {a}, [ia = a.id, rows, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.node_grad(self);
    Tensor& ga = g.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga.at(r, c) += up.at(c, r);
  });
}

Var masked_fill(Var a, std::span<const std::uint8_t> mask, double fill) {
  Graph& g = graph_of(a);
  const Tensor& av = a.value();
  if (mask.size() != av.size())
    throw ShapeError("masked_fill: mask of " + std::to_string(mask.size()) + " entries for " + to_string(av.shape()));
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = fill;
  return g.record(std::move(out), {a},
                  [ia = a.id, m = std::vector<std::uint8_t>(mask.begin(), mask.end())](Graph& g, std::size_t self) {
                    const Tensor& up = g.node_grad(self);
                    Tensor& ga = g.grad_buffer(ia);
                    for (std::size_t i = 0; i < up.size(); ++i)
                      if (!m[i]) ga[i] += up[i];
                  });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return g.record(Tensor::scalar(total), {a}, [ia = a.id](Graph& g, std::size_t self) {
    const double up = g.node_grad(self)[0];
    for (double& v : g.grad_buffer(ia).values()) v += up;
  });
}

Var cross_entropy_sum(Var logits, std::span<const std::int32_t> labels, std::int32_t ignore_label) {
  Graph& g = graph_of(logits);
  const Tensor& lv = logits.value();
  require_matrix("cross_entropy_sum", lv);
  if (labels.size() != lv.rows())
    throw ShapeError("cross_entropy_sum: " + std::to_string(labels.size()) + " labels for logits " +
                     to_string(lv.shape()));
  const std::size_t rows = lv.rows(), cols = lv.cols();
  auto probs = std::make_shared<Tensor>(lv.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] == ignore_label) continue;
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= cols)
      throw ShapeError("cross_entropy_sum: label " + std::to_string(labels[r]) + " outside " + std::to_string(cols) +
                       " classes");
    auto in = lv.row(r);
    auto p = probs->row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (p[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) p[c] /= z;
    total += -(in[static_cast<std::size_t>(labels[r])] - mx - std::log(z));
  }
  return g.record(Tensor::scalar(total), {logits},
                  [il = logits.id, probs, rows, cols, ignore_label,
                   lab = std::vector<std::int32_t>(labels.begin(), labels.end())](Graph& g, std::size_t self) {
                    const double up = g.node_grad(self)[0];
                    Tensor& gl = g.grad_buffer(il);
                    for (std::size_t r = 0; r < rows; ++r) {
                      if (lab[r] == ignore_label) continue;
                      double* gr = gl.data() + r * cols;
                      const double* p = probs->data() + r * cols;
                      for (std::size_t c = 0; c < cols; ++c) gr[c] += up * p[c];
                      gr[static_cast<std::size_t>(lab[r])] -= up;
                    }
                  });
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const ScalarFunction& f, std::span<const Tensor> points, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw Error("grad_check: epsilon must lie in (0, 1e-2]");
  for (const Tensor& p : points)
    if (!p.all_finite()) throw Error("grad_check: non-finite value in the evaluation point");

  std::vector<Tensor> analytic;
  std::uint64_t base_signature = 0;
  {
    Graph g(true);
    std::vector<Var> vars;
    for (const Tensor& p : points) vars.push_back(g.parameter(p));
    Var out = f(g, vars);
    if (out.value().size() != 1) throw ShapeError("grad_check: function is not scalar-valued");
    if (!out.value().all_finite()) throw Error("grad_check: non-finite function value");
    base_signature = g.branch_signature();
    g.backward(out);
    for (Var v : vars) {
      if (!v.grad().all_finite()) throw Error("grad_check: non-finite analytic gradient");
      analytic.push_back(v.grad());
    }
  }

  std::vector<Tensor> work(points.begin(), points.end());
  bool crossed = false;
  auto evaluate = [&]() {
    Graph g(false);
    std::vector<Var> vars;
    for (const Tensor& p : work) vars.push_back(g.reference(p, false));
    const double value = f(g, vars).value().item();
    if (!std::isfinite(value)) throw Error("grad_check: non-finite function value during differencing");
    crossed = crossed || g.branch_signature() != base_signature;
    return value;
  };

  constexpr int kMaxHalvings = 10;
  GradCheckReport report;
  for (std::size_t k = 0; k < work.size(); ++k) {
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const double x0 = work[k][i];
      auto at = [&](double offset) {
        work[k][i] = x0 + offset;
        return evaluate();
      };
      double h = epsilon;
      double numeric = 0.0;
      for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, h /= 2) {
        crossed = false;
        const double fp1 = at(h), fm1 = at(-h), fp2 = at(2 * h), fm2 = at(-2 * h);
        numeric = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
        if (!crossed) break;
        if (attempt == 0) ++report.reduced_steps;
      }
      work[k][i] = x0;
      const double a = analytic[k][i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double err = scale < 1e-8 ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
      ++report.coordinates;
      if (err > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = err;
        report.worst_input = k;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point, double epsilon) {
  std::vector<Tensor> points{point};
  return grad_check([&](Graph& g, std::span<const Var> vars) { return f(g, vars[0]); }, points, epsilon)
      .max_relative_error;
}

}  // namespace matra::nn
