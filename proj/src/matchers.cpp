#include "vmr/matchers.hpp"

#include <stdexcept>

namespace vmr {

std::vector<ConvLayerSpec> default_conv_stack(HeadKind kind) {
  if (kind == HeadKind::kCmi) return {{3, false}};
  return {{5, true}, {5, true}, {5, true}};
}

const ag::ConvPlan& ConvPlanCache::get(int kernel, int videos) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = plans_[{kernel, videos}];
  if (!slot) slot = std::make_unique<ag::ConvPlan>(ag::ConvPlan::build(grid_, kernel, videos));
  return *slot;
}

template <typename T>
TransformedInputs<T> transform_inputs(const ag::Var<T>& q, const ag::Var<T>& content, const ag::Var<T>& location,
                                      const ag::Var<T>& w2, const ag::Var<T>& w3) {
  if (content.rows() != location.rows() || content.cols() != location.cols()) {
    throw std::invalid_argument("transform_inputs: content and location shapes differ");
  }
  return {ag::matmul_nt(q, w3), ag::add(content, ag::matmul_nt(location, w2))};
}

template <typename T>
Matcher<T> Matcher<T>::create(ParameterSet<T>& params, HeadKind kind, int d, std::vector<ConvLayerSpec> stack,
                              bool cmi_bias) {
  if (stack.empty()) stack = default_conv_stack(kind);
  Matcher m;
  m.kind = kind;
  const std::string p = kind == HeadKind::kCmi ? "cmi." : "tcn.";
  m.w3 = params.add(p + "w3", d, d);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (stack[i].kernel <= 0 || stack[i].kernel % 2 == 0) throw std::invalid_argument("conv kernels must be odd");
    Conv c;
    c.spec = stack[i];
    c.weight = params.add(p + "conv" + std::to_string(i) + ".weight", stack[i].kernel * stack[i].kernel * d, d);
    c.bias = params.add(p + "conv" + std::to_string(i) + ".bias", 1, d);
    m.convs.push_back(c);
  }
  if (kind == HeadKind::kCmi) {
    m.w1 = params.add(p + "w1", d, 2 * d);
    m.has_w1_bias = cmi_bias;
    if (cmi_bias) m.w1_bias = params.add(p + "w1_bias", 1, d);
  }
  m.w = params.add(p + "w", 1, d);
  return m;
}

template <typename T>
void Matcher<T>::init(ParameterSet<T>& params, std::mt19937_64& rng) const {
  init_fan_in(params[w3], static_cast<double>(params[w3].value.cols()), rng);
  for (const auto& c : convs) {
    init_fan_in(params[c.weight], static_cast<double>(params[c.weight].value.rows()), rng);
    params[c.bias].value.setZero();
  }
  if (kind == HeadKind::kCmi) {
    init_fan_in(params[w1], static_cast<double>(params[w1].value.cols()), rng);
    if (has_w1_bias) params[w1_bias].value.setZero();
  }
  init_fan_in(params[w], static_cast<double>(params[w].value.cols()), rng);
}

template <typename T>
ag::Var<T> Matcher<T>::logits(Binding<T>& bind, const ag::Var<T>& q_bar_cells, const ag::Var<T>& x,
                              ConvPlanCache& plans, int videos) const {
  if (q_bar_cells.rows() != x.rows() || q_bar_cells.cols() != x.cols()) {
    throw std::invalid_argument("matcher: query and moment tensors differ in shape");
  }
  const auto conv_stack = [&](ag::Var<T> h) {
    for (const auto& c : convs) {
      h = ag::grid_conv(h, bind(c.weight), bind(c.bias), plans.get(c.spec.kernel, videos));
      if (c.spec.relu) h = ag::relu(h);
    }
    return h;
  };
  if (kind == HeadKind::kCmi) {
    const auto phi = conv_stack(x);
    const auto fused = ag::concat_cols(ag::mul(q_bar_cells, phi), ag::add(q_bar_cells, phi));
    auto h = ag::matmul_nt(fused, bind(w1));
    if (has_w1_bias) h = ag::add_row(h, bind(w1_bias));
    return ag::matmul_nt(h, bind(w));
  }
  return ag::matmul_nt(conv_stack(ag::mul(q_bar_cells, x)), bind(w));
}

template TransformedInputs<float> transform_inputs(const ag::Var<float>&, const ag::Var<float>&,
                                                   const ag::Var<float>&, const ag::Var<float>&,
                                                   const ag::Var<float>&);
template TransformedInputs<double> transform_inputs(const ag::Var<double>&, const ag::Var<double>&,
                                                    const ag::Var<double>&, const ag::Var<double>&,
                                                    const ag::Var<double>&);
template struct Matcher<float>;
template struct Matcher<double>;

}  // namespace vmr
