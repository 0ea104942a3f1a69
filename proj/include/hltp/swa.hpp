#pragma once

#include <cstddef>
#include <string>

#include "hltp/nn.hpp"

namespace hltp::swa {

using ad::Var;

struct ShiftWindowConfig {
  std::size_t window_x = 5, window_y = 4;
  std::size_t stride_x = 2, stride_y = 1;
};

/// Returns the common window count z for an L x D score map, enforcing that
/// both axes produce the same positive integer count.
std::size_t validate_window(const ShiftWindowConfig& cfg, std::size_t L, std::size_t D);

/// Shift-window score map (the production path behind the tape op). The test
/// suite holds an independent quadruple-loop transcription.
Var shift_window_scores(const Var& q, const Var& k, const Var& w_a,
                        const ShiftWindowConfig& cfg);

/// LSTM/GRU -> ELU -> Linear track embedder shared across agents.
struct TrackEmbedder {
  enum class Kind { Lstm, Gru };
  Kind kind = Kind::Lstm;
  nn::LstmCell lstm;
  nn::GruCell gru;
  nn::Linear out;
  std::size_t in_channels = 4;
  std::size_t d_emb = 0;

  static TrackEmbedder create(nn::ParamRegistry& reg, const std::string& name, Kind kind,
                              std::size_t in_channels, std::size_t hidden, std::size_t d_emb,
                              nn::Init& init);
  /// track_flat: [A x (frames*in_channels)] -> [A x d_emb]
  Var embed(const Var& track_flat, std::size_t frames) const;
};

struct SwaConfig {
  std::size_t d_emb = 32;
  std::size_t d_q = 32, d_k = 32, d_v = 32;
  std::size_t heads = 4;
  ShiftWindowConfig window;
  bool shift_windows = true;  // false = plain dot-product attention (ablation)
};

/// Multi-head shift-window attention over the agent axis. The learnable score
/// scale w_a is one weight per score column, broadcast across agent rows so
/// the block stays equivariant under neighbor permutation.
struct SwaBlock {
  SwaConfig cfg;
  nn::Linear wq, wk, wv;
  Var w_a;                 // [1 x d_k/heads]
  std::size_t agents = 0;  // L of the score map
  std::size_t head_dim = 0;

  static SwaBlock create(nn::ParamRegistry& reg, const std::string& name, const SwaConfig& cfg,
                         std::size_t agents, std::size_t value_in_dim, nn::Init& init);

  struct Projections {
    Var q, k, v;  // each [A x d]
  };
  Projections project(const Var& embeddings, const Var& track_flat) const;

  /// embeddings: [A x d_emb]; track_flat: [A x (T*4)] -> O_vis [A x d_v/heads]
  Var forward(const Var& embeddings, const Var& track_flat, const Tensor& agent_mask) const;
};

}  // namespace hltp::swa
