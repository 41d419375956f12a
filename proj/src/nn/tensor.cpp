#include "lootcrawl/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lootcrawl::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
std::size_t ParamStore<T>::add(std::string name, Tensor<T> value) {
  if (lookup_.count(name)) throw Error(ErrorCode::ShapeMismatch, "duplicate parameter name " + name);
  lookup_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

template <typename T>
std::size_t ParamStore<T>::index(std::string_view name) const {
  auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) throw Error(ErrorCode::ShapeMismatch, "unknown parameter " + std::string(name));
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count(std::string_view prefix) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (names_[i].rfind(prefix, 0) == 0) n += values_[i].size();
  }
  return n;
}

template <typename T>
Gradients<T>::Gradients(const ParamStore<T>& store) {
  grads.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) grads.emplace_back(store.value(i).shape);
}

template <typename T>
void Gradients<T>::zero() {
  for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), T(0));
}

template <typename T>
void Gradients<T>::add(const Gradients& other) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& dst = grads[i].data;
    const auto& src = other.grads.at(i).data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

template <typename T>
void Gradients<T>::scale(T s) {
  for (auto& g : grads) {
    for (auto& v : g.data) v *= s;
  }
}

template struct Tensor<float>;
template struct Tensor<double>;
template class ParamStore<float>;
template class ParamStore<double>;
template struct Gradients<float>;
template struct Gradients<double>;

}  // namespace lootcrawl::nn
