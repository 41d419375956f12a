#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lootcrawl/error.hpp"

namespace lootcrawl::nn {

using Shape = std::vector<int>;

/// Cache-line aligned storage. The vectorized kernels pick their loop split from
/// the buffer address, so unaligned buffers make float sums depend on heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

std::string shape_string(const Shape& shape);

/// Dense row-major tensor. T is float for training and double for gradient checks.
template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, std::initializer_list<T> values) : Tensor(std::move(s), Buffer<T>(values)) {}
  Tensor(Shape s, const std::vector<T>& values) : Tensor(std::move(s), Buffer<T>(values.begin(), values.end())) {}
  Tensor(Shape s, Buffer<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape)) throw Error(ErrorCode::ShapeMismatch, "data length does not match " + shape_string(shape));
  }


  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Named parameter tensors in insertion order; the checkpoint layout follows it.
template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> value);

  std::size_t size() const { return values_.size(); }
  bool contains(std::string_view name) const { return lookup_.count(std::string(name)) != 0; }
  std::size_t index(std::string_view name) const;
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Tensor<T>& value(std::size_t i) const { return values_.at(i); }
  Tensor<T>& value(std::size_t i) { return values_.at(i); }
  const Tensor<T>& operator[](std::string_view name) const { return values_.at(index(name)); }
  Tensor<T>& operator[](std::string_view name) { return values_.at(index(name)); }

  std::size_t parameter_count() const;
  /// Sum of element counts over parameters whose name starts with `prefix`.
  std::size_t parameter_count(std::string_view prefix) const;

  std::uint64_t init_seed = 0;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    out.init_seed = init_seed;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Gradient buffers aligned index-for-index with a ParamStore.
template <typename T>
struct Gradients {
  std::vector<Tensor<T>> grads;

  Gradients() = default;
  explicit Gradients(const ParamStore<T>& store);
  void zero();
  void add(const Gradients& other);
  void scale(T s);
  Tensor<T>& operator[](std::size_t i) { return grads.at(i); }
  const Tensor<T>& operator[](std::size_t i) const { return grads.at(i); }
  std::size_t size() const { return grads.size(); }
};

}  // namespace lootcrawl::nn
