#include "vmr/disentangle.hpp"

#include <stdexcept>

namespace vmr {

template <typename T>
Disentangler<T> Disentangler<T>::create(ParameterSet<T>& params, int d) {
  Disentangler g;
  g.content_w = params.add("disentangle.content_w", d, d);
  g.content_b = params.add("disentangle.content_b", 1, d);
  g.location_w = params.add("disentangle.location_w", d, d);
  g.location_b = params.add("disentangle.location_b", 1, d);
  return g;
}

template <typename T>
void Disentangler<T>::init(ParameterSet<T>& params, std::mt19937_64& rng) const {
  const auto d = static_cast<double>(params[content_w].value.cols());
  init_fan_in(params[content_w], d, rng);
  init_fan_in(params[location_w], d, rng);
  params[content_b].value.setZero();
  params[location_b].value.setZero();
}

template <typename T>
DisentangledMoment<T> Disentangler<T>::apply(Binding<T>& bind, const ag::Var<T>& v) const {
  const auto wc = bind(content_w);
  if (v.cols() != wc.cols()) throw std::invalid_argument("disentangle: moment vector has the wrong dimension");
  return {ag::add_row(ag::matmul_nt(v, wc), bind(content_b)),
          ag::add_row(ag::matmul_nt(v, bind(location_w)), bind(location_b))};
}

template <typename T>
ag::Var<T> recon_loss(const ag::Var<T>& location, const ag::Var<T>& p) {
  return ag::mean(ag::row_norms(ag::sub(location, p)));
}

template struct Disentangler<float>;
template struct Disentangler<double>;
template ag::Var<float> recon_loss(const ag::Var<float>&, const ag::Var<float>&);
template ag::Var<double> recon_loss(const ag::Var<double>&, const ag::Var<double>&);

}  // namespace vmr
