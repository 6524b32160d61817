#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "kgqa/numerics/parameters.hpp"
#include "kgqa/numerics/tensor.hpp"

namespace kgqa::nn {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode computation record, rebuilt for every question.
///
/// Nodes are appended in evaluation order, so the node vector is already a
/// topological order. A tape built with `Mode::inference` keeps forward values
/// only and refuses backward().
class Tape {
 public:
  enum class Mode { training, inference };
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(Mode mode = Mode::training) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf that reads a parameter; backward() adds into `p.grad`.
  Var parameter(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every parameter leaf.
  /// Parameter gradients accumulate across calls until zeroed.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the most recent backward() at a node; zeros if it was not reached.
  Tensor grad(Var v) const;
  const char* tag(std::size_t id) const { return nodes_[id].tag; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  std::size_t size() const { return nodes_.size(); }
  bool training() const { return mode_ == Mode::training; }

  // Interface for operation implementations.
  Var record(const char* tag, std::vector<std::size_t> inputs, Tensor value, BackwardFn fn);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Output gradient of a node during backward().
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient accumulator of an input, allocated on first use.
  Tensor& grad_ref(std::size_t id);

 private:
  struct Node {
    const char* tag = "";
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Mode mode_;
  std::deque<Node> nodes_;  // deque: values stay put while the tape grows
};

}  // namespace kgqa::nn
