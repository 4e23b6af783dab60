#pragma once

#include <cstdint>
#include <vector>

namespace mocotp {

// Dense row-major float tensor. Shapes used in practice are (N,C,H,W) for
// image batches, (N,D) for feature batches and (D) for vectors.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp);

  static Tensor zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }
  static Tensor full(std::vector<int> shp, float value);

  std::int64_t numel() const;
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  float& at(int i) { return data[static_cast<std::size_t>(i)]; }
  float at(int i) const { return data[static_cast<std::size_t>(i)]; }
  float& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  float at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  float& at(int n, int c, int h, int w) {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  float at(int n, int c, int h, int w) const {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  void fill(float value);
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

// Throws ContractError unless the two tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace mocotp
