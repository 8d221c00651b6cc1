#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slug/common.hpp"

namespace slug::nn {

// Spatial shape, channel-last storage: element (x, y, c) lives at
// ((y * w) + x) * c_count + c. Vectors are represented as (1, 1, n).
struct Shape {
  int w = 0;
  int h = 0;
  int c = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(c);
  }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return std::to_string(w) + "x" + std::to_string(h) + "x" +
           std::to_string(c);
  }
};

struct Tensor {
  Shape shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(s.size(), 0.0) {}
  Tensor(Shape s, std::vector<double> data) : shape(s), v(std::move(data)) {
    if (v.size() != shape.size()) {
      throw ConfigError("tensor data length " + std::to_string(v.size()) +
                        " does not match shape " + shape.str());
    }
  }

  double& at(int x, int y, int c) {
    return v[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + c];
  }
  double at(int x, int y, int c) const {
    return v[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + c];
  }
  std::size_t size() const { return v.size(); }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return dot(a, a); }

inline void axpy(double alpha, const std::vector<double>& x,
                 std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::vector<double>& x, double alpha) {
  for (double& e : x) e *= alpha;
}

}  // namespace slug::nn
