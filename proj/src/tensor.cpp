#include "leaflite/tensor.hpp"

#include <cmath>
#include <sstream>

namespace leaflite {

Shape::Shape(std::initializer_list<int> dims) : Shape(std::span<const int>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const int> dims) {
  if (dims.size() > static_cast<std::size_t>(kMaxRank)) {
    throw ShapeError("rank " + std::to_string(dims.size()) + " exceeds the maximum of 4");
  }
  rank_ = static_cast<int>(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 0) throw ShapeError("negative extent in shape");
    dims_[i] = dims[i];
  }
}

std::size_t Shape::numel() const noexcept {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (int i = 0; i < rank_; ++i) n *= static_cast<std::size_t>(dims_[static_cast<std::size_t>(i)]);
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (int i = 0; i < rank_; ++i) {
    if (i) os << 'x';
    os << dims_[static_cast<std::size_t>(i)];
  }
  os << ']';
  return os.str();
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template bool all_finite(const BasicTensor<float>&);
template bool all_finite(const BasicTensor<double>&);

}  // namespace leaflite
