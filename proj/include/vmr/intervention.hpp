#pragma once

#include <vector>

#include "vmr/disentangle.hpp"

namespace vmr {

/// How the uniform prior P(l) = 1/N enters the expectation. kAbsorbed uses
/// the attention weights as the expectation weights; kLiteral additionally
/// multiplies the attention output by 1/N.
enum class PriorMode { kAbsorbed, kLiteral };

/// Location confounder bank: one disentangled location vector per valid
/// candidate, rows in grid order (stacked per video for batches).
template <typename T>
ag::Var<T> build_location_bank(Binding<T>& bind, const ag::Var<T>& moments, const Disentangler<T>& g) {
  return g.apply(bind, moments).location;
}

/// Parameters of the backdoor-adjusted expectation. W2 doubles as the
/// matcher's location map in v_bar = c + W2 l.
template <typename T>
struct Intervention {
  ParamId w2 = 0;
  ParamId w5 = 0;
  ParamId w6 = 0;
  ParamId w7 = 0;

  static Intervention create(ParameterSet<T>& params, int d);
  void init(ParameterSet<T>& params, std::mt19937_64& rng) const;

  /// E_l[h(l)] for every cell of every video: with m = W5 q + W6 c per cell,
  /// keys W7 l_k and values W2 l_k over the cell's own video bank,
  /// sum_k softmax_k(m . W7 l_k / sqrt(d)) W2 l_k.
  ///   q:       V x d (one row per video)
  ///   content: V*N x d
  ///   bank:    V*N x d
  /// When `attention` is given it receives each video's N x N weights.
  ag::Var<T> expected_effect(Binding<T>& bind, const ag::Var<T>& q, const ag::Var<T>& content,
                             const ag::Var<T>& bank, PriorMode mode,
                             std::vector<ag::Var<T>>* attention = nullptr) const;
};

}  // namespace vmr
