#include "hltp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>

namespace hltp::ad {

namespace {

std::uint64_t next_id() {
  static std::uint64_t counter = 0;
  return ++counter;
}

Var make_node(Tensor val, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->id = next_id();
  for (auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(bw);
  }
  return n;
}

bool is_scalar(const Var& v) { return v->val.numel() == 1; }

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw std::runtime_error(std::string(op) + ": shape mismatch " + a->val.shape_str() +
                             " vs " + b->val.shape_str());
}

}  // namespace

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->id = next_id();
  return n;
}

Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

Var leaf(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->id = next_id();
  n->requires_grad = true;
  return n;
}

void backward(const Var& root) {
  if (root->val.numel() != 1) throw std::runtime_error("backward: root must be scalar");
  root->g().fill(1.0);

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && !seen.count(p.get())) {
        seen.insert(p.get());
        stack.push_back(p.get());
      }
    }
  }
  // Parents always carry smaller ids, so descending id order is a valid
  // reverse topological order and is stable across runs.
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
  for (Node* n : order) {
    if (n->backward_fn && n->grad.numel() != 0) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// binary elementwise

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Var binary(const Var& a, const Var& b, BinOp op) {
  const bool sa = is_scalar(a), sb = is_scalar(b);
  if (!sa && !sb) check_same_shape(a, b, "binary");
  const Tensor& av = a->val;
  const Tensor& bv = b->val;
  Tensor out(sa ? bv.shape() : av.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[sa ? 0 : i];
    const double y = bv[sb ? 0 : i];
    switch (op) {
      case BinOp::Add: out[i] = x + y; break;
      case BinOp::Sub: out[i] = x - y; break;
      case BinOp::Mul: out[i] = x * y; break;
      case BinOp::Div: out[i] = x / y; break;
    }
  }
  return make_node(std::move(out), {a, b}, [op, sa, sb](Node& self) {
    Var a = self.parents[0], b = self.parents[1];
    const std::size_t n = self.val.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = self.grad[i];
      const double x = a->val[sa ? 0 : i];
      const double y = b->val[sb ? 0 : i];
      double ga = 0, gb = 0;
      switch (op) {
        case BinOp::Add: ga = g; gb = g; break;
        case BinOp::Sub: ga = g; gb = -g; break;
        case BinOp::Mul: ga = g * y; gb = g * x; break;
        case BinOp::Div: ga = g / y; gb = -g * x / (y * y); break;
      }
      if (a->requires_grad) a->g()[sa ? 0 : i] += ga;
      if (b->requires_grad) b->g()[sb ? 0 : i] += gb;
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, BinOp::Add); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinOp::Sub); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinOp::Mul); }
Var div(const Var& a, const Var& b) { return binary(a, b, BinOp::Div); }

Var add_scalar(const Var& a, double s) { return add(a, constant_scalar(s)); }
Var mul_scalar(const Var& a, double s) { return mul(a, constant_scalar(s)); }

// ---------------------------------------------------------------------------
// unary

namespace {

Var unary(const Var& a, double (*fwd)(double), double (*bwd)(double x, double y)) {
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(a->val[i]);
  return make_node(std::move(out), {a}, [bwd](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    for (std::size_t i = 0; i < self.val.numel(); ++i)
      g[i] += self.grad[i] * bwd(a->val[i], self.val[i]);
  });
}

}  // namespace

Var neg(const Var& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}
Var exp_(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
Var log_(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
Var sqrt_(const Var& a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}
Var tanh_(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}
Var sigmoid_(const Var& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}
Var elu_(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}
Var relu_(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}
Var softplus_(const Var& a) {
  return unary(a,
               [](double x) { return x > 30 ? x : std::log1p(std::exp(x)); },
               [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var leaky_relu_(const Var& a, double slope) {
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double x = a->val[i];
    out[i] = x > 0 ? x : slope * x;
  }
  return make_node(std::move(out), {a}, [slope](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    for (std::size_t i = 0; i < self.val.numel(); ++i)
      g[i] += self.grad[i] * (a->val[i] > 0 ? 1.0 : slope);
  });
}

// ---------------------------------------------------------------------------
// structure

Var matmul(const Var& a, const Var& b) {
  const std::size_t m = a->val.rows(), k = a->val.cols();
  const std::size_t k2 = b->val.rows(), n = b->val.cols();
  if (k != k2)
    throw std::runtime_error("matmul: inner dims " + a->val.shape_str() + " vs " +
                             b->val.shape_str());
  Tensor out(m, n);
  const double* A = a->val.data();
  const double* B = b->val.data();
  double* C = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double x = A[i * k + p];
      if (x == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += x * brow[j];
    }
  return make_node(std::move(out), {a, b}, [m, k, n](Node& self) {
    Var a = self.parents[0], b = self.parents[1];
    const double* G = self.grad.data();
    if (a->requires_grad) {
      double* GA = a->g().data();
      const double* B = b->val.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          if (g == 0.0) continue;
          const double* brow = B + j;  // column j
          for (std::size_t p = 0; p < k; ++p) GA[i * k + p] += g * brow[p * n];
        }
    }
    if (b->requires_grad) {
      double* GB = b->g().data();
      const double* A = a->val.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double x = A[i * k + p];
          if (x == 0.0) continue;
          const double* grow = G + i * n;
          double* brow = GB + p * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += x * grow[j];
        }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  Var y = matmul(x, w);
  const std::size_t m = y->val.rows(), n = y->val.cols();
  if (b->val.numel() != n) throw std::runtime_error("linear: bias size mismatch");
  Tensor out = y->val;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += b->val[j];
  return make_node(std::move(out), {y, b}, [m, n](Node& self) {
    Var y = self.parents[0], b = self.parents[1];
    if (y->requires_grad) y->g().add_inplace(self.grad);
    if (b->requires_grad) {
      Tensor& g = b->g();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Var transpose(const Var& a) {
  const std::size_t m = a->val.rows(), n = a->val.cols();
  Tensor out(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a->val.at(i, j);
  return make_node(std::move(out), {a}, [m, n](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad.at(j, i);
  });
}

Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
  const std::size_t m = a->val.rows(), n = a->val.cols();
  if (c1 > n || c0 >= c1) throw std::runtime_error("slice_cols: bad range");
  Tensor out(m, c1 - c0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = a->val.at(i, j);
  return make_node(std::move(out), {a}, [m, n, c0, c1](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = c0; j < c1; ++j) g[i * n + j] += self.grad.at(i, j - c0);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::runtime_error("concat_cols: empty");
  const std::size_t m = parts[0]->val.rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->val.rows() != m) throw std::runtime_error("concat_cols: row mismatch");
    total += p->val.cols();
  }
  Tensor out(m, total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p->val.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) out.at(i, off + j) = p->val.at(i, j);
    off += c;
  }
  return make_node(std::move(out), parts, [m, total](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t c = p->val.cols();
      if (p->requires_grad) {
        Tensor& g = p->g();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * total + off + j];
      }
      off += c;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::runtime_error("concat_rows: empty");
  const std::size_t n = parts[0]->val.cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->val.cols() != n) throw std::runtime_error("concat_rows: col mismatch");
    total += p->val.rows();
  }
  Tensor out(total, n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p->val.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) out.at(off + i, j) = p->val.at(i, j);
    off += p->val.rows();
  }
  return make_node(std::move(out), parts, [n](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t r = p->val.rows();
      if (p->requires_grad) {
        Tensor& g = p->g();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad.at(off + i, j);
      }
      off += r;
    }
  });
}

Var select_row(const Var& a, std::size_t r) {
  const std::size_t n = a->val.cols();
  if (r >= a->val.rows()) throw std::runtime_error("select_row: out of range");
  Tensor out(1, n);
  for (std::size_t j = 0; j < n; ++j) out.at(0, j) = a->val.at(r, j);
  return make_node(std::move(out), {a}, [r, n](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    for (std::size_t j = 0; j < n; ++j) g[r * n + j] += self.grad[j];
  });
}

Var repeat_row(const Var& v, std::size_t n) {
  if (v->val.rows() != 1) throw std::runtime_error("repeat_row: expects [1 x c]");
  const std::size_t c = v->val.cols();
  Tensor out(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = v->val[j];
  return make_node(std::move(out), {v}, [n, c](Node& self) {
    Var v = self.parents[0];
    if (!v->requires_grad) return;
    Tensor& g = v->g();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
  });
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape));
  if (out.numel() != a->val.numel()) throw std::runtime_error("reshape: numel mismatch");
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->val[i];
  return make_node(std::move(out), {a}, [](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    for (std::size_t i = 0; i < self.val.numel(); ++i) g[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// reductions

Var sum_all(const Var& a) {
  double s = 0;
  for (std::size_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
  return make_node(Tensor::scalar(s), {a}, [](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    const double gs = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gs;
  });
}

Var mean_all(const Var& a) { return mul_scalar(sum_all(a), 1.0 / double(a->val.numel())); }

Var sum_rows(const Var& a) {
  const std::size_t m = a->val.rows(), n = a->val.cols();
  Tensor out(1, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a->val.at(i, j);
  return make_node(std::move(out), {a}, [m, n](Node& self) {
    Var a = self.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->g();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j];
  });
}

// ---------------------------------------------------------------------------
// softmax / masking

Var masked_softmax(const Var& x, const Tensor& mask, int axis) {
  const std::size_t m = x->val.rows(), n = x->val.cols();
  const std::size_t axis_len = axis == 0 ? m : n;
  if (mask.numel() != axis_len) throw std::runtime_error("masked_softmax: mask length");
  Tensor out(m, n);
  const std::size_t lines = axis == 0 ? n : m;
  for (std::size_t line = 0; line < lines; ++line) {
    double mx = -1e300;
    for (std::size_t t = 0; t < axis_len; ++t) {
      if (mask[t] == 0.0) continue;
      const double v = axis == 0 ? x->val.at(t, line) : x->val.at(line, t);
      if (v > mx) mx = v;
    }
    double z = 0;
    for (std::size_t t = 0; t < axis_len; ++t) {
      if (mask[t] == 0.0) continue;
      const double v = axis == 0 ? x->val.at(t, line) : x->val.at(line, t);
      z += std::exp(v - mx);
    }
    for (std::size_t t = 0; t < axis_len; ++t) {
      double p = 0;
      if (mask[t] != 0.0) {
        const double v = axis == 0 ? x->val.at(t, line) : x->val.at(line, t);
        p = std::exp(v - mx) / z;
      }
      if (axis == 0)
        out.at(t, line) = p;
      else
        out.at(line, t) = p;
    }
  }
  Tensor mask_copy = mask;
  return make_node(std::move(out), {x},
                   [m, n, axis, axis_len, mask_copy](Node& self) {
    Var x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->g();
    const std::size_t lines = axis == 0 ? n : m;
    for (std::size_t line = 0; line < lines; ++line) {
      double dot = 0;
      for (std::size_t t = 0; t < axis_len; ++t) {
        const double y = axis == 0 ? self.val.at(t, line) : self.val.at(line, t);
        const double gy = axis == 0 ? self.grad.at(t, line) : self.grad.at(line, t);
        dot += y * gy;
      }
      for (std::size_t t = 0; t < axis_len; ++t) {
        if (mask_copy[t] == 0.0) continue;
        const double y = axis == 0 ? self.val.at(t, line) : self.val.at(line, t);
        const double gy = axis == 0 ? self.grad.at(t, line) : self.grad.at(line, t);
        const double gx = y * (gy - dot);
        if (axis == 0)
          g[t * n + line] += gx;
        else
          g[line * n + t] += gx;
      }
    }
  });
}

Var zero_rows(const Var& x, const Tensor& row_mask) {
  const std::size_t m = x->val.rows(), n = x->val.cols();
  if (row_mask.numel() != m) throw std::runtime_error("zero_rows: mask length");
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    if (row_mask[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = x->val.at(i, j);
  }
  Tensor mask_copy = row_mask;
  return make_node(std::move(out), {x}, [m, n, mask_copy](Node& self) {
    Var x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->g();
    for (std::size_t i = 0; i < m; ++i) {
      if (mask_copy[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad.at(i, j);
    }
  });
}

Var mul_block_rows(const Var& s, const Var& h, std::size_t block) {
  const std::size_t m = s->val.rows(), n = s->val.cols();
  const std::size_t t = h->val.cols();
  if (h->val.rows() != m || t * block != n)
    throw std::runtime_error("mul_block_rows: shape mismatch");
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t f = 0; f < t; ++f) {
      const double w = h->val.at(i, f);
      for (std::size_t b = 0; b < block; ++b)
        out.at(i, f * block + b) = w * s->val.at(i, f * block + b);
    }
  return make_node(std::move(out), {s, h}, [m, t, block](Node& self) {
    Var s = self.parents[0], h = self.parents[1];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t f = 0; f < t; ++f) {
        const double w = h->val.at(i, f);
        double gh = 0;
        for (std::size_t b = 0; b < block; ++b) {
          const std::size_t j = f * block + b;
          const double g = self.grad.at(i, j);
          if (s->requires_grad) s->g().at(i, j) += g * w;
          gh += g * s->val.at(i, j);
        }
        if (h->requires_grad) h->g().at(i, f) += gh;
      }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t m = x->val.rows(), n = x->val.cols();
  if (gamma->val.numel() != n || beta->val.numel() != n)
    throw std::runtime_error("layer_norm: affine size");
  Tensor out(m, n);
  Tensor xhat(m, n);
  Tensor inv_std(std::vector<std::size_t>{m});
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += x->val.at(i, j);
    mu /= double(n);
    double var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x->val.at(i, j) - mu;
      var += d * d;
    }
    var /= double(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (x->val.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = gamma->val[j] * xh + beta->val[j];
    }
  }
  return make_node(std::move(out), {x, gamma, beta},
                   [m, n, xhat, inv_std](Node& self) {
    Var x = self.parents[0], gamma = self.parents[1], beta = self.parents[2];
    for (std::size_t i = 0; i < m; ++i) {
      double mean_dxhat = 0, mean_dxhat_xhat = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double dxh = self.grad.at(i, j) * gamma->val[j];
        mean_dxhat += dxh;
        mean_dxhat_xhat += dxh * xhat.at(i, j);
      }
      mean_dxhat /= double(n);
      mean_dxhat_xhat /= double(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double g = self.grad.at(i, j);
        if (x->requires_grad) {
          const double dxh = g * gamma->val[j];
          x->g().at(i, j) +=
              inv_std[i] * (dxh - mean_dxhat - xhat.at(i, j) * mean_dxhat_xhat);
        }
        if (gamma->requires_grad) gamma->g()[j] += g * xhat.at(i, j);
        if (beta->requires_grad) beta->g()[j] += g;
      }
    }
  });
}

Var masked_channel_norm(const Var& z, const Tensor& row_mask, std::size_t channels,
                        const Var& gamma, const Var& beta, double eps) {
  const std::size_t m = z->val.rows(), n = z->val.cols();
  if (n % channels != 0) throw std::runtime_error("masked_channel_norm: bad layout");
  if (gamma->val.numel() != channels || beta->val.numel() != channels)
    throw std::runtime_error("masked_channel_norm: affine size");
  const std::size_t frames = n / channels;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (row_mask[i] != 0.0) ++valid;
  const double count = double(valid * frames);
  if (count == 0) throw std::runtime_error("masked_channel_norm: no valid rows");

  Tensor mu = Tensor::vec(channels), inv_std = Tensor::vec(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    double s = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (row_mask[i] == 0.0) continue;
      for (std::size_t f = 0; f < frames; ++f) s += z->val.at(i, f * channels + c);
    }
    const double mean = s / count;
    double var = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (row_mask[i] == 0.0) continue;
      for (std::size_t f = 0; f < frames; ++f) {
        const double d = z->val.at(i, f * channels + c) - mean;
        var += d * d;
      }
    }
    var /= count;
    mu[c] = mean;
    inv_std[c] = 1.0 / std::sqrt(var + eps);
  }

  Tensor out(m, n);
  Tensor xhat(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    if (row_mask[i] == 0.0) continue;
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t j = f * channels + c;
        const double xh = (z->val.at(i, j) - mu[c]) * inv_std[c];
        xhat.at(i, j) = xh;
        out.at(i, j) = gamma->val[c] * xh + beta->val[c];
      }
  }
  Tensor mask_copy = row_mask;
  return make_node(std::move(out), {z, gamma, beta},
                   [m, n, channels, frames, count, xhat, inv_std, mask_copy](Node& self) {
    Var z = self.parents[0], gamma = self.parents[1], beta = self.parents[2];
    for (std::size_t c = 0; c < channels; ++c) {
      double mean_dxh = 0, mean_dxh_xh = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (mask_copy[i] == 0.0) continue;
        for (std::size_t f = 0; f < frames; ++f) {
          const std::size_t j = f * channels + c;
          const double dxh = self.grad.at(i, j) * gamma->val[c];
          mean_dxh += dxh;
          mean_dxh_xh += dxh * xhat.at(i, j);
        }
      }
      mean_dxh /= count;
      mean_dxh_xh /= count;
      for (std::size_t i = 0; i < m; ++i) {
        if (mask_copy[i] == 0.0) continue;
        for (std::size_t f = 0; f < frames; ++f) {
          const std::size_t j = f * channels + c;
          const double g = self.grad.at(i, j);
          if (z->requires_grad) {
            const double dxh = g * gamma->val[c];
            z->g().at(i, j) +=
                inv_std[c] * (dxh - mean_dxh - xhat.at(i, j) * mean_dxh_xh);
          }
          if (gamma->requires_grad) gamma->g()[c] += g * xhat.at(i, j);
          if (beta->requires_grad) beta->g()[c] += g;
        }
      }
    }
  });
}

Var dropout(const Var& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw std::runtime_error("dropout: p must be < 1");
  const double keep = 1.0 - p;
  Tensor mask(x->val.shape());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < mask.numel(); ++i)
    mask[i] = u(rng) < keep ? 1.0 / keep : 0.0;
  Tensor out(x->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x->val[i] * mask[i];
  return make_node(std::move(out), {x}, [mask](Node& self) {
    Var x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->g();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Var swa_shift_scores(const Var& q, const Var& k, const Var& w_a, const ShiftWindow& win) {
  const std::size_t L = q->val.rows(), D = q->val.cols();
  if (!q->val.same_shape(k->val)) throw std::runtime_error("swa_shift_scores: q/k shape");
  if (!w_a->val.same_shape(q->val)) throw std::runtime_error("swa_shift_scores: w_a shape");
  if (win.len_x > L || win.len_y > D || win.stride_x == 0 || win.stride_y == 0)
    throw std::runtime_error("swa_shift_scores: window exceeds map");
  if ((L - win.len_x) % win.stride_x != 0 || (D - win.len_y) % win.stride_y != 0)
    throw std::runtime_error("swa_shift_scores: non-integral window count");
  const std::size_t zx = (L - win.len_x) / win.stride_x + 1;
  const std::size_t zy = (D - win.len_y) / win.stride_y + 1;
  if (zx != zy) throw std::runtime_error("swa_shift_scores: z_x != z_y");

  Tensor acc(L, D);
  std::vector<std::uint32_t> cnt(L * D, 0);
  for (std::size_t mwin = 0; mwin < zx; ++mwin)
    for (std::size_t nwin = 0; nwin < zy; ++nwin) {
      const std::size_t r0 = mwin * win.stride_x;
      const std::size_t c0 = nwin * win.stride_y;
      for (std::size_t a = 0; a < win.len_x; ++a)
        for (std::size_t b = 0; b < win.len_y; ++b) {
          const std::size_t idx = (r0 + a) * D + (c0 + b);
          acc[idx] += q->val[idx] * k->val[idx];
          ++cnt[idx];
        }
    }
  Tensor out(L, D);
  for (std::size_t i = 0; i < L * D; ++i)
    out[i] = cnt[i] ? w_a->val[i] * (acc[i] / double(cnt[i])) : 0.0;

  return make_node(std::move(out), {q, k, w_a}, [L, D, cnt](Node& self) {
    Var q = self.parents[0], k = self.parents[1], w_a = self.parents[2];
    for (std::size_t i = 0; i < L * D; ++i) {
      if (!cnt[i]) continue;
      const double g = self.grad[i];
      if (q->requires_grad) q->g()[i] += g * w_a->val[i] * k->val[i];
      if (k->requires_grad) k->g()[i] += g * w_a->val[i] * q->val[i];
      if (w_a->requires_grad) w_a->g()[i] += g * q->val[i] * k->val[i];
    }
  });
}

Var detach(const Var& a) { return constant(a->val); }

}  // namespace hltp::ad
