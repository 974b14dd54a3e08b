#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "common/real.hpp"
#include "common/rng.hpp"

namespace ctig {

// Dense row-major tensor. Deliberately minimal: shape + flat storage.
// Heavy math goes through explicit loops and BLAS, not expression templates.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<real> v;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(numel_of(shape)), real(0));
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  bool empty() const { return v.empty(); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  real* data() { return v.data(); }
  const real* data() const { return v.data(); }

  real& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
  real operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

  void zero() { std::fill(v.begin(), v.end(), real(0)); }
  void fill(real x) { std::fill(v.begin(), v.end(), x); }

  void reshape(std::vector<int64_t> s) {
    if (numel_of(s) != numel()) throw std::runtime_error("reshape: numel mismatch");
    shape = std::move(s);
  }

  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<int64_t> s, real x) {
    Tensor t(std::move(s));
    t.fill(x);
    return t;
  }

  static Tensor randn(std::vector<int64_t> s, Rng& rng, real stddev = real(1)) {
    Tensor t(std::move(s));
    for (auto& x : t.v) x = static_cast<real>(rng.normal()) * stddev;
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void add_(const Tensor& o) {
    assert(o.numel() == numel());
    for (int64_t i = 0; i < numel(); ++i) v[static_cast<size_t>(i)] += o[i];
  }
  void scale_(real a) {
    for (auto& x : v) x *= a;
  }

  bool all_finite() const {
    for (real x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }
};

inline std::string shape_str(const Tensor& t) {
  std::string s = "(";
  for (size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

}  // namespace ctig
