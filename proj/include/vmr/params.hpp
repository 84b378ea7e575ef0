#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "vmr/autograd.hpp"

namespace vmr {

using ParamId = std::size_t;

/// Ordered collection of named parameters. Ids are positions in
/// registration order and stay valid for the lifetime of the set.
template <typename T>
class ParameterSet {
 public:
  ParamId add(std::string name, ag::Index rows, ag::Index cols);

  ag::Parameter<T>& operator[](ParamId id) { return params_[id]; }
  const ag::Parameter<T>& operator[](ParamId id) const { return params_[id]; }
  /// Throws std::out_of_range for unknown names.
  ParamId find(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// FNV-1a over the raw parameter bytes in registration order.
  std::uint64_t checksum() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<ag::Parameter<T>> params_;
};

/// Binds each parameter to a tape leaf at most once per forward pass. A
/// frozen binding uses constants, so nothing is kept for backpropagation.
template <typename T>
class Binding {
 public:
  Binding(ag::Tape<T>& tape, ParameterSet<T>& params, bool trainable = true)
      : tape_(tape), params_(params), vars_(params.size()), trainable_(trainable) {}
  /// Frozen binding over read-only parameters.
  Binding(ag::Tape<T>& tape, const ParameterSet<T>& params)
      : tape_(tape), params_(const_cast<ParameterSet<T>&>(params)), vars_(params.size()), trainable_(false) {}

  ag::Var<T> operator()(ParamId id) {
    if (!vars_[id].valid()) vars_[id] = trainable_ ? tape_.parameter(params_[id]) : tape_.constant(params_[id].value);
    return vars_[id];
  }
  ag::Tape<T>& tape() { return tape_; }

 private:
  ag::Tape<T>& tape_;
  ParameterSet<T>& params_;
  std::vector<ag::Var<T>> vars_;
  bool trainable_;
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void init_fan_in(ag::Parameter<T>& p, double fan_in, std::mt19937_64& rng);

}  // namespace vmr
