#pragma once

#include "vmr/autograd.hpp"
#include "vmr/params.hpp"

namespace vmr {

template <typename T>
struct DisentangledMoment {
  ag::Var<T> content;   // n x d
  ag::Var<T> location;  // n x d
};

/// Two affine maps splitting a moment vector into content and location.
template <typename T>
struct Disentangler {
  ParamId content_w = 0;  // d x d
  ParamId content_b = 0;  // 1 x d
  ParamId location_w = 0;
  ParamId location_b = 0;

  static Disentangler create(ParameterSet<T>& params, int d);
  void init(ParameterSet<T>& params, std::mt19937_64& rng) const;

  /// Row-wise over v (n x d).
  DisentangledMoment<T> apply(Binding<T>& bind, const ag::Var<T>& v) const;
};

/// Mean over rows of ||location_i - p_i||_2 (a single row gives the plain
/// Euclidean distance).
template <typename T>
ag::Var<T> recon_loss(const ag::Var<T>& location, const ag::Var<T>& p);

/// Distance correlation of paired rows; n >= 2.
template <typename T>
T distance_correlation(const ag::Matrix<T>& x, const ag::Matrix<T>& y, T eps = T(1e-9)) {
  return ag::distance_correlation_value(x, y, eps);
}

}  // namespace vmr
