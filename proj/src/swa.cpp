#include "hltp/swa.hpp"

#include <cmath>
#include <stdexcept>

namespace hltp::swa {

using namespace ad;

std::size_t validate_window(const ShiftWindowConfig& cfg, std::size_t L, std::size_t D) {
  if (L == 0 || D == 0) throw std::runtime_error("validate_window: empty score map");
  if (cfg.window_x == 0 || cfg.window_y == 0 || cfg.stride_x == 0 || cfg.stride_y == 0)
    throw std::runtime_error("validate_window: window and stride must be positive");
  if (cfg.window_x > L || cfg.window_y > D)
    throw std::runtime_error("validate_window: window " + std::to_string(cfg.window_x) + "x" +
                             std::to_string(cfg.window_y) + " exceeds map " +
                             std::to_string(L) + "x" + std::to_string(D));
  const std::size_t rx = L - cfg.window_x, ry = D - cfg.window_y;
  if (rx % cfg.stride_x != 0 || ry % cfg.stride_y != 0) {
    const double zx = double(rx) / double(cfg.stride_x) + 1.0;
    const double zy = double(ry) / double(cfg.stride_y) + 1.0;
    throw std::runtime_error("validate_window: non-integral window counts z_x=" +
                             std::to_string(zx) + ", z_y=" + std::to_string(zy));
  }
  const std::size_t zx = rx / cfg.stride_x + 1, zy = ry / cfg.stride_y + 1;
  if (zx != zy)
    throw std::runtime_error("validate_window: asynchronous traversal z_x=" +
                             std::to_string(zx) + " != z_y=" + std::to_string(zy));
  return zx;
}

Var shift_window_scores(const Var& q, const Var& k, const Var& w_a,
                        const ShiftWindowConfig& cfg) {
  validate_window(cfg, q->val.rows(), q->val.cols());
  ShiftWindow win{cfg.window_x, cfg.window_y, cfg.stride_x, cfg.stride_y};
  return swa_shift_scores(q, k, w_a, win);
}

TrackEmbedder TrackEmbedder::create(nn::ParamRegistry& reg, const std::string& name, Kind kind,
                                    std::size_t in_channels, std::size_t hidden,
                                    std::size_t d_emb, nn::Init& init) {
  TrackEmbedder e;
  e.kind = kind;
  e.in_channels = in_channels;
  e.d_emb = d_emb;
  if (kind == Kind::Lstm)
    e.lstm = nn::LstmCell::create(reg, name + ".lstm", in_channels, hidden, init);
  else
    e.gru = nn::GruCell::create(reg, name + ".gru", in_channels, hidden, init);
  e.out = nn::Linear::create(reg, name + ".out", hidden, d_emb, init);
  return e;
}

Var TrackEmbedder::embed(const Var& track_flat, std::size_t frames) const {
  if (frames == 0) throw std::runtime_error("TrackEmbedder: zero frames");
  Var h = kind == Kind::Lstm ? nn::run_lstm_last(lstm, track_flat, frames, in_channels)
                             : nn::run_gru_last(gru, track_flat, frames, in_channels);
  return out.apply(elu_(h));
}

SwaBlock SwaBlock::create(nn::ParamRegistry& reg, const std::string& name, const SwaConfig& cfg,
                          std::size_t agents, std::size_t value_in_dim, nn::Init& init) {
  if (cfg.heads == 0 || cfg.d_q % cfg.heads || cfg.d_k % cfg.heads || cfg.d_v % cfg.heads)
    throw std::runtime_error("SwaBlock: head count must divide d_q, d_k, d_v");
  if (cfg.d_q != cfg.d_k)
    throw std::runtime_error("SwaBlock: d_q and d_k must match for windowed score maps");
  if (cfg.d_k / cfg.heads != cfg.d_v / cfg.heads)
    throw std::runtime_error("SwaBlock: per-head key and value dims must match");
  SwaBlock b;
  b.cfg = cfg;
  b.agents = agents;
  b.head_dim = cfg.d_k / cfg.heads;
  if (cfg.shift_windows) validate_window(cfg.window, agents, b.head_dim);
  b.wq = nn::Linear::create(reg, name + ".wq", cfg.d_emb, cfg.d_q, init);
  b.wk = nn::Linear::create(reg, name + ".wk", cfg.d_emb, cfg.d_k, init);
  b.wv = nn::Linear::create(reg, name + ".wv", value_in_dim, cfg.d_v, init);
  b.w_a = reg.add(name + ".w_a", Tensor::full(1, b.head_dim, 1.0));
  return b;
}

SwaBlock::Projections SwaBlock::project(const Var& embeddings, const Var& track_flat) const {
  Projections p;
  const std::size_t A = embeddings->val.rows();
  p.q = repeat_row(wq.apply(select_row(embeddings, 0)), A);  // target broadcast to all rows
  p.k = wk.apply(embeddings);
  p.v = wv.apply(track_flat);
  return p;
}

Var SwaBlock::forward(const Var& embeddings, const Var& track_flat,
                      const Tensor& agent_mask) const {
  const auto proj = project(embeddings, track_flat);
  const std::size_t H = cfg.heads, hd = head_dim;
  const double scale = 1.0 / std::sqrt(double(cfg.d_k));

  Var acc, skip;
  for (std::size_t i = 0; i < H; ++i) {
    Var qi = slice_cols(proj.q, i * hd, (i + 1) * hd);
    Var ki = slice_cols(proj.k, i * hd, (i + 1) * hd);
    Var vi = slice_cols(proj.v, i * hd, (i + 1) * hd);

    Var weights;
    if (cfg.shift_windows) {
      Var canvas = repeat_row(w_a, agents);
      Var scores = shift_window_scores(qi, ki, canvas, cfg.window);
      weights = masked_softmax(mul_scalar(scores, scale), agent_mask, /*axis=*/0);
    } else {
      Var scores = mul_scalar(matmul(qi, transpose(ki)), scale);
      weights = masked_softmax(scores, agent_mask, /*axis=*/1);
    }

    Var head = cfg.shift_windows ? mul(weights, tanh_(vi)) : matmul(weights, tanh_(vi));
    acc = acc ? add(acc, head) : head;
    skip = skip ? add(skip, vi) : vi;
  }
  return zero_rows(add(acc, skip), agent_mask);
}

}  // namespace hltp::swa
