#include "vmr/params.hpp"

#include <cmath>
#include <stdexcept>

namespace vmr {

template <typename T>
ParamId ParameterSet<T>::add(std::string name, ag::Index rows, ag::Index cols) {
  for (const auto& p : params_) {
    if (p.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
  }
  ag::Parameter<T> p;
  p.name = std::move(name);
  p.value = ag::Matrix<T>::Zero(rows, cols);
  p.grad = ag::Matrix<T>::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

template <typename T>
ParamId ParameterSet<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named " + name);
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
std::uint64_t ParameterSet<T>::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(p.value.size()) * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

template <typename T>
void init_fan_in(ag::Parameter<T>& p, double fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (ag::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(u(rng));
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template void init_fan_in(ag::Parameter<float>&, double, std::mt19937_64&);
template void init_fan_in(ag::Parameter<double>&, double, std::mt19937_64&);

}  // namespace vmr
