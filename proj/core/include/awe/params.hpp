#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "awe/rng.hpp"
#include "awe/tape.hpp"
#include "awe/tensor.hpp"

namespace awe::nn {

// Ordered, named collection of trainable tensors.
class ParameterStore {
 public:
  Tensor& add(std::string name, Tensor value);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& at(std::size_t i) { return tensors_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }
  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  Tensor& get(std::string_view name) { return tensors_[index_of(name)]; }
  const Tensor& get(std::string_view name) const { return tensors_[index_of(name)]; }
  std::size_t parameter_count() const;

  // Registers every tensor as a traced leaf, in store order.
  std::vector<Var> bind(Tape& tape) const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

}  // namespace awe::nn
