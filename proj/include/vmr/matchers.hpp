#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "vmr/grid_ops.hpp"
#include "vmr/params.hpp"

namespace vmr {

enum class HeadKind { kCmi, kTcn };

struct ConvLayerSpec {
  int kernel = 3;
  bool relu = false;
};

/// Default stacks: CMI is a single 3x3 layer without activation, TCN three
/// 5x5 layers each followed by a rectifier.
std::vector<ConvLayerSpec> default_conv_stack(HeadKind kind);

/// Caches conv gather tables per (kernel, videos). Returned references stay
/// valid for the cache's lifetime, which must cover any tape using them.
class ConvPlanCache {
 public:
  explicit ConvPlanCache(MomentGrid grid) : grid_(std::move(grid)) {}
  const ag::ConvPlan& get(int kernel, int videos);

 private:
  MomentGrid grid_;
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::unique_ptr<ag::ConvPlan>> plans_;
};

template <typename T>
struct TransformedInputs {
  ag::Var<T> q_bar;  // W3 q
  ag::Var<T> v_bar;  // c + W2 l
};

/// q_bar = W3 q, v_bar = c + W2 l.
template <typename T>
TransformedInputs<T> transform_inputs(const ag::Var<T>& q, const ag::Var<T>& content, const ag::Var<T>& location,
                                      const ag::Var<T>& w2, const ag::Var<T>& w3);

template <typename T>
struct Matcher {
  struct Conv {
    ParamId weight = 0;  // kernel^2 * d x d
    ParamId bias = 0;    // 1 x d
    ConvLayerSpec spec;
  };

  HeadKind kind = HeadKind::kTcn;
  ParamId w3 = 0;      // d x d
  ParamId w = 0;       // 1 x d
  ParamId w1 = 0;      // d x 2d, CMI only
  ParamId w1_bias = 0;  // 1 x d, CMI with has_w1_bias only
  bool has_w1_bias = false;
  std::vector<Conv> convs;

  static Matcher create(ParameterSet<T>& params, HeadKind kind, int d, std::vector<ConvLayerSpec> stack = {},
                        bool cmi_bias = false);
  void init(ParameterSet<T>& params, std::mt19937_64& rng) const;

  /// Pre-sigmoid scores, one per cell (V*N x 1).
  ///   q_bar_cells: V*N x d, each cell's row of W3 q
  ///   x:           V*N x d, the (intervened) moment tensor
  /// CMI: w . W1 [(q_bar * phi) ++ (q_bar + phi)], phi = conv(x).
  /// TCN: w . phi*, phi* = conv stack over q_bar * x.
  ag::Var<T> logits(Binding<T>& bind, const ag::Var<T>& q_bar_cells, const ag::Var<T>& x, ConvPlanCache& plans,
                    int videos) const;
};

}  // namespace vmr
