#pragma once

#include <span>
#include <string>

#include "kgqa/numerics/parameters.hpp"
#include "kgqa/numerics/tape.hpp"

namespace kgqa::nn {

/// Gate weights of one GRU direction, owned by a ParameterStore.
///
/// z = sigmoid(x W_z^T + h U_z^T + b_z)
/// r = sigmoid(x W_r^T + h U_r^T + b_r)
/// n = tanh(x W_h^T + (r * h) U_h^T + b_h)
/// h' = z * h + (1 - z) * n
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter* w_z = nullptr;
  Parameter* w_r = nullptr;
  Parameter* w_h = nullptr;
  Parameter* u_z = nullptr;
  Parameter* u_r = nullptr;
  Parameter* u_h = nullptr;
  Parameter* b_z = nullptr;
  Parameter* b_r = nullptr;
  Parameter* b_h = nullptr;

  /// Registers `<prefix>.w_z` ... `<prefix>.b_h`, initialised U(-1/sqrt(h), 1/sqrt(h)).
  static GruParams create(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim, Rng& rng);
  /// Looks up parameters registered earlier (e.g. after loading a checkpoint).
  static GruParams attach(ParameterStore& store, const std::string& prefix);
};

/// GruParams read onto a particular tape.
struct BoundGru {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Var w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
};

BoundGru bind(Tape& tape, const GruParams& params);

/// One step for a batch: x is n x input_dim, h_prev n x hidden_dim.
Var gru_cell(const BoundGru& gru, Var x, Var h_prev);

/// Runs the cell over `sequence` from `h0` and returns the final hidden state.
Var gru_encode(const BoundGru& gru, std::span<const Var> sequence, Var h0);

struct BiGruOutput {
  Var mean;            ///< (forward_final + backward_final) / 2
  Var forward_final;   ///< state after reading the sequence left to right
  Var backward_final;  ///< state after reading it right to left
};

/// Bidirectional pass; throws InvalidArgument on an empty sequence.
BiGruOutput bigru_encode(const BoundGru& forward, const BoundGru& backward,
                         std::span<const Var> sequence, Var h0_forward, Var h0_backward);

}  // namespace kgqa::nn
