#include "vmr/intervention.hpp"

#include <cmath>
#include <stdexcept>

namespace vmr {

template <typename T>
Intervention<T> Intervention<T>::create(ParameterSet<T>& params, int d) {
  Intervention iv;
  iv.w2 = params.add("intervention.w2", d, d);
  iv.w5 = params.add("intervention.w5", d, d);
  iv.w6 = params.add("intervention.w6", d, d);
  iv.w7 = params.add("intervention.w7", d, d);
  return iv;
}

template <typename T>
void Intervention<T>::init(ParameterSet<T>& params, std::mt19937_64& rng) const {
  for (ParamId id : {w2, w5, w6, w7}) init_fan_in(params[id], static_cast<double>(params[id].value.cols()), rng);
}

template <typename T>
ag::Var<T> Intervention<T>::expected_effect(Binding<T>& bind, const ag::Var<T>& q, const ag::Var<T>& content,
                                            const ag::Var<T>& bank, PriorMode mode,
                                            std::vector<ag::Var<T>>* attention) const {
  using ag::Index;
  const Index videos = q.rows();
  const Index d = q.cols();
  if (videos < 1 || bank.rows() == 0) throw std::invalid_argument("expected_location_effect: empty location bank");
  if (bank.rows() % videos != 0 || content.rows() != bank.rows()) {
    throw std::invalid_argument("expected_location_effect: bank and content must hold N rows per query");
  }
  if (content.cols() != d || bank.cols() != d) throw std::invalid_argument("expected_location_effect: dimension mismatch");
  const Index n = bank.rows() / videos;

  const auto cw = ag::matmul_nt(content, bind(w6));
  const auto qw = ag::matmul_nt(q, bind(w5));
  const auto keys = ag::matmul_nt(bank, bind(w7));
  const auto values = ag::matmul_nt(bank, bind(w2));
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));

  std::vector<ag::Var<T>> parts;
  parts.reserve(static_cast<std::size_t>(videos));
  if (attention) attention->clear();
  for (Index v = 0; v < videos; ++v) {
    const auto m = ag::add_row(ag::slice_rows(cw, v * n, n), ag::slice_rows(qw, v, 1));
    const auto logits = ag::scale(ag::matmul_nt(m, ag::slice_rows(keys, v * n, n)), inv_sqrt_d);
    const auto alpha = ag::softmax_rows(logits);
    if (attention) attention->push_back(alpha);
    auto out = ag::matmul(alpha, ag::slice_rows(values, v * n, n));
    if (mode == PriorMode::kLiteral) out = ag::scale(out, T(1) / static_cast<T>(n));
    parts.push_back(out);
  }
  return videos == 1 ? parts[0] : ag::concat_rows(std::span<const ag::Var<T>>(parts));
}

template struct Intervention<float>;
template struct Intervention<double>;

}  // namespace vmr
