#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "awe/tensor.hpp"

namespace awe::nn {

class Tape;

// Handle to a node recorded on a Tape. Handles go stale when the tape is
// cleared; using a stale handle raises NumericError ("detached graph").
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, std::uint64_t generation)
      : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

// Reverse-mode gradient tape. Nodes are appended in evaluation order, so
// creation order is a valid topological order for the reverse sweep.
//
// A tape constructed with grad_enabled = false only evaluates values; it is
// the inference path and keeps no backward closures.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value);
  // Traced leaf. Gradients returned by backward() follow registration order.
  Var parameter(Tensor value);

  // Runs the reverse sweep from a 1x1 loss and returns d loss / d parameter
  // for every parameter() leaf. Clears the tape afterwards.
  std::vector<Tensor> backward(Var loss);
  void clear();

  // Interface for op implementations.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn, std::string_view op);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn, std::string_view op) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(fn), op);
  }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient accumulator of node `id`, zero-initialized on first access.
  Tensor& grad(std::size_t id);
  void check(const Var& v) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  bool grad_enabled_;
  std::uint64_t generation_ = 1;
  std::deque<Node> nodes_;
  std::vector<std::size_t> parameters_;
};

}  // namespace awe::nn
