#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gyrocal::nn {

/// Dense row-major tensor of doubles. `grad`, when allocated, mirrors the
/// value buffer elementwise.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> s, std::vector<double> v)
      : shape(s), values(std::move(v)) {
    if (numel_of(shape) != values.size()) {
      throw std::invalid_argument("tensor: shape does not match value count");
    }
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    Tensor t;
    t.shape = std::move(s);
    t.values.assign(numel_of(t.shape), 0.0);
    return t;
  }

  std::size_t numel() const { return values.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  void set_requires_grad() {
    requires_grad = true;
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }

  void zero_grad() { grad.assign(values.size(), 0.0); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

}  // namespace gyrocal::nn
