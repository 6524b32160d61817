#include "kgqa/numerics/gru.hpp"

#include <cmath>

#include "kgqa/error.hpp"
#include "kgqa/numerics/ops.hpp"

namespace kgqa::nn {

GruParams GruParams::create(ParameterStore& store, const std::string& prefix,
                            std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto mk = [&](const char* suffix, std::size_t rows, std::size_t cols) {
    return &store.add(prefix + suffix, uniform_tensor(rows, cols, bound, rng));
  };
  GruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_z = mk(".w_z", hidden_dim, input_dim);
  p.w_r = mk(".w_r", hidden_dim, input_dim);
  p.w_h = mk(".w_h", hidden_dim, input_dim);
  p.u_z = mk(".u_z", hidden_dim, hidden_dim);
  p.u_r = mk(".u_r", hidden_dim, hidden_dim);
  p.u_h = mk(".u_h", hidden_dim, hidden_dim);
  p.b_z = mk(".b_z", 1, hidden_dim);
  p.b_r = mk(".b_r", 1, hidden_dim);
  p.b_h = mk(".b_h", 1, hidden_dim);
  return p;
}

GruParams GruParams::attach(ParameterStore& store, const std::string& prefix) {
  GruParams p;
  p.w_z = &store.get(prefix + ".w_z");
  p.w_r = &store.get(prefix + ".w_r");
  p.w_h = &store.get(prefix + ".w_h");
  p.u_z = &store.get(prefix + ".u_z");
  p.u_r = &store.get(prefix + ".u_r");
  p.u_h = &store.get(prefix + ".u_h");
  p.b_z = &store.get(prefix + ".b_z");
  p.b_r = &store.get(prefix + ".b_r");
  p.b_h = &store.get(prefix + ".b_h");
  p.hidden_dim = p.w_z->value.rows();
  p.input_dim = p.w_z->value.cols();
  for (const Parameter* m : {p.w_r, p.w_h}) {
    if (m->value.rows() != p.hidden_dim || m->value.cols() != p.input_dim) {
      throw DimensionError("GRU '" + prefix + "': input weights disagree in shape");
    }
  }
  for (const Parameter* m : {p.u_z, p.u_r, p.u_h}) {
    if (m->value.rows() != p.hidden_dim || m->value.cols() != p.hidden_dim) {
      throw DimensionError("GRU '" + prefix + "': recurrent weights are not square");
    }
  }
  for (const Parameter* b : {p.b_z, p.b_r, p.b_h}) {
    if (b->value.rows() != 1 || b->value.cols() != p.hidden_dim) {
      throw DimensionError("GRU '" + prefix + "': bias shape mismatch");
    }
  }
  return p;
}

BoundGru bind(Tape& tape, const GruParams& p) {
  BoundGru g;
  g.input_dim = p.input_dim;
  g.hidden_dim = p.hidden_dim;
  g.w_z = tape.parameter(*p.w_z);
  g.w_r = tape.parameter(*p.w_r);
  g.w_h = tape.parameter(*p.w_h);
  g.u_z = tape.parameter(*p.u_z);
  g.u_r = tape.parameter(*p.u_r);
  g.u_h = tape.parameter(*p.u_h);
  g.b_z = tape.parameter(*p.b_z);
  g.b_r = tape.parameter(*p.b_r);
  g.b_h = tape.parameter(*p.b_h);
  return g;
}

Var gru_cell(const BoundGru& g, Var x, Var h_prev) {
  if (x.cols() != g.input_dim || h_prev.cols() != g.hidden_dim || x.rows() != h_prev.rows()) {
    throw DimensionError("gru_cell: input " + shape_string(x.value()) + ", hidden " +
                         shape_string(h_prev.value()) + " for a " + std::to_string(g.input_dim) +
                         " -> " + std::to_string(g.hidden_dim) + " cell");
  }
  Var z = sigmoid(add_row(add(linear(x, g.w_z), linear(h_prev, g.u_z)), g.b_z));
  Var r = sigmoid(add_row(add(linear(x, g.w_r), linear(h_prev, g.u_r)), g.b_r));
  Var n = tanh(add_row(add(linear(x, g.w_h), linear(mul(r, h_prev), g.u_h)), g.b_h));
  return add(mul(z, h_prev), mul(one_minus(z), n));
}

Var gru_encode(const BoundGru& g, std::span<const Var> sequence, Var h0) {
  Var h = h0;
  for (const Var& x : sequence) h = gru_cell(g, x, h);
  return h;
}

BiGruOutput bigru_encode(const BoundGru& forward, const BoundGru& backward,
                         std::span<const Var> sequence, Var h0_forward, Var h0_backward) {
  if (sequence.empty()) throw InvalidArgument("bigru_encode: empty sequence");
  Var hf = h0_forward;
  for (const Var& x : sequence) hf = gru_cell(forward, x, hf);
  Var hb = h0_backward;
  for (auto it = sequence.rbegin(); it != sequence.rend(); ++it) hb = gru_cell(backward, *it, hb);
  return {scale(add(hf, hb), 0.5), hf, hb};
}

}  // namespace kgqa::nn
