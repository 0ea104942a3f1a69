#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hltp/autodiff.hpp"

namespace hltp::nn {

using ad::Var;

/// Ordered collection of named trainable leaves. Registration order is the
/// optimizer-state order, so it must be deterministic across runs.
class ParamRegistry {
public:
  Var add(const std::string& name, Tensor init);
  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  std::size_t scalar_count() const;

  std::map<std::string, Tensor> snapshot() const;
  /// Loads values by name; throws on missing names or shape mismatches.
  void load(const std::map<std::string, Tensor>& values);

private:
  std::vector<std::pair<std::string, Var>> items_;
};

/// Deterministic weight initializer (xavier-uniform fan rule).
class Init {
public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}
  Tensor xavier(std::size_t fan_in, std::size_t fan_out);
  Tensor uniform(std::size_t r, std::size_t c, double lo, double hi);
  Tensor zeros_vec(std::size_t n) { return Tensor::vec(n); }

private:
  std::mt19937_64 rng_;
};

struct Linear {
  Var w, b;
  static Linear create(ParamRegistry& reg, const std::string& name, std::size_t in,
                       std::size_t out, Init& init);
  Var apply(const Var& x) const { return ad::linear(x, w, b); }
};

/// Standard LSTM cell; gate layout (i, f, g, o) along the 4h axis.
struct LstmCell {
  Var wx, wh, b;
  std::size_t hidden = 0;
  static LstmCell create(ParamRegistry& reg, const std::string& name, std::size_t in,
                         std::size_t hidden, Init& init);
  /// Returns (h', c'); rows are batch entries.
  std::pair<Var, Var> step(const Var& x, const Var& h, const Var& c) const;
};

/// GRU cell; gate layout (r, z, n).
struct GruCell {
  Var wx, wh, bx, bh;
  std::size_t hidden = 0;
  static GruCell create(ParamRegistry& reg, const std::string& name, std::size_t in,
                        std::size_t hidden, Init& init);
  Var step(const Var& x, const Var& h) const;
};

/// Runs a recurrent cell over `frames` column blocks of a flat track matrix
/// [rows x (frames*in)] and returns the last hidden state.
Var run_lstm_last(const LstmCell& cell, const Var& track_flat, std::size_t frames,
                  std::size_t in);
Var run_gru_last(const GruCell& cell, const Var& track_flat, std::size_t frames,
                 std::size_t in);

}  // namespace hltp::nn
