#include "mocotp/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "mocotp/error.hpp"

namespace mocotp {

Tensor::Tensor(std::vector<int> shp) : shape(std::move(shp)) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ContractError("Tensor: negative dimension");
    n *= d;
  }
  data.assign(static_cast<std::size_t>(n), 0.0f);
}

Tensor Tensor::full(std::vector<int> shp, float value) {
  Tensor t(std::move(shp));
  t.fill(value);
  return t;
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

void Tensor::fill(float value) { std::fill(data.begin(), data.end(), value); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b)) throw ContractError(std::string(where) + ": shape mismatch");
}

}  // namespace mocotp
