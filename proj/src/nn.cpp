#include "hltp/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hltp::nn {

using namespace ad;

Var ParamRegistry::add(const std::string& name, Tensor init) {
  for (const auto& [n, v] : items_)
    if (n == name) throw std::runtime_error("duplicate parameter name: " + name);
  Var v = leaf(std::move(init));
  items_.emplace_back(name, v);
  return v;
}

std::size_t ParamRegistry::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : items_) n += v->val.numel();
  return n;
}

std::map<std::string, Tensor> ParamRegistry::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : items_) out[name] = v->val;
  return out;
}

void ParamRegistry::load(const std::map<std::string, Tensor>& values) {
  for (auto& [name, v] : items_) {
    auto it = values.find(name);
    if (it == values.end()) throw std::runtime_error("checkpoint missing parameter: " + name);
    if (!it->second.same_shape(v->val))
      throw std::runtime_error("checkpoint shape mismatch for " + name + ": " +
                               it->second.shape_str() + " vs " + v->val.shape_str());
    v->val = it->second;
  }
}

Tensor Init::xavier(std::size_t fan_in, std::size_t fan_out) {
  const double lim = std::sqrt(6.0 / double(fan_in + fan_out));
  return uniform(fan_in, fan_out, -lim, lim);
}

Tensor Init::uniform(std::size_t r, std::size_t c, double lo, double hi) {
  Tensor t(r, c);
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng_);
  return t;
}

Linear Linear::create(ParamRegistry& reg, const std::string& name, std::size_t in,
                      std::size_t out, Init& init) {
  Linear l;
  l.w = reg.add(name + ".w", init.xavier(in, out));
  l.b = reg.add(name + ".b", Tensor::vec(out));
  return l;
}

LstmCell LstmCell::create(ParamRegistry& reg, const std::string& name, std::size_t in,
                          std::size_t hidden, Init& init) {
  LstmCell c;
  c.hidden = hidden;
  c.wx = reg.add(name + ".wx", init.xavier(in, 4 * hidden));
  c.wh = reg.add(name + ".wh", init.xavier(hidden, 4 * hidden));
  c.b = reg.add(name + ".b", Tensor::vec(4 * hidden));
  return c;
}

std::pair<Var, Var> LstmCell::step(const Var& x, const Var& h, const Var& c) const {
  Var gates = linear(x, wx, b);
  gates = add(gates, matmul(h, wh));
  const std::size_t H = hidden;
  Var gi = sigmoid_(slice_cols(gates, 0, H));
  Var gf = sigmoid_(slice_cols(gates, H, 2 * H));
  Var gg = tanh_(slice_cols(gates, 2 * H, 3 * H));
  Var go = sigmoid_(slice_cols(gates, 3 * H, 4 * H));
  Var c_next = add(mul(gf, c), mul(gi, gg));
  Var h_next = mul(go, tanh_(c_next));
  return {h_next, c_next};
}

GruCell GruCell::create(ParamRegistry& reg, const std::string& name, std::size_t in,
                        std::size_t hidden, Init& init) {
  GruCell c;
  c.hidden = hidden;
  c.wx = reg.add(name + ".wx", init.xavier(in, 3 * hidden));
  c.wh = reg.add(name + ".wh", init.xavier(hidden, 3 * hidden));
  c.bx = reg.add(name + ".bx", Tensor::vec(3 * hidden));
  c.bh = reg.add(name + ".bh", Tensor::vec(3 * hidden));
  return c;
}

Var GruCell::step(const Var& x, const Var& h) const {
  Var gx = linear(x, wx, bx);
  Var gh = linear(h, wh, bh);
  const std::size_t H = hidden;
  Var r = sigmoid_(add(slice_cols(gx, 0, H), slice_cols(gh, 0, H)));
  Var z = sigmoid_(add(slice_cols(gx, H, 2 * H), slice_cols(gh, H, 2 * H)));
  Var n = tanh_(add(slice_cols(gx, 2 * H, 3 * H), mul(r, slice_cols(gh, 2 * H, 3 * H))));
  Var one_minus_z = add_scalar(neg(z), 1.0);
  return add(mul(one_minus_z, n), mul(z, h));
}

Var run_lstm_last(const LstmCell& cell, const Var& track_flat, std::size_t frames,
                  std::size_t in) {
  if (frames == 0) throw std::runtime_error("run_lstm_last: zero frames");
  const std::size_t rows = track_flat->val.rows();
  Var h = constant(Tensor(rows, cell.hidden));
  Var c = constant(Tensor(rows, cell.hidden));
  for (std::size_t t = 0; t < frames; ++t) {
    Var x = slice_cols(track_flat, t * in, (t + 1) * in);
    auto [h2, c2] = cell.step(x, h, c);
    h = h2;
    c = c2;
  }
  return h;
}

Var run_gru_last(const GruCell& cell, const Var& track_flat, std::size_t frames,
                 std::size_t in) {
  if (frames == 0) throw std::runtime_error("run_gru_last: zero frames");
  const std::size_t rows = track_flat->val.rows();
  Var h = constant(Tensor(rows, cell.hidden));
  for (std::size_t t = 0; t < frames; ++t) {
    Var x = slice_cols(track_flat, t * in, (t + 1) * in);
    h = cell.step(x, h);
  }
  return h;
}

}  // namespace hltp::nn
