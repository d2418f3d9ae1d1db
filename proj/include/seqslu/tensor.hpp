#pragma once

#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace seqslu {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);
int64_t shape_size(const Shape& shape);

// Cache-line aligned storage, so vectorized kernels take the same code path
// (and summation order) wherever the allocation lands.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

// Dense row-major array. Operations treat the last extent as the feature
// dimension and fold every leading extent into rows.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  static Tensor matrix(int64_t rows, int64_t cols, std::initializer_list<T> values);
  static Tensor identity(int64_t n);

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // Leading extents folded together; a rank-1 tensor is a single row.
  int64_t rows() const { return cols() == 0 ? 0 : size() / cols(); }
  int64_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::span<T> row(int64_t r) { return {data_.data() + r * cols(), static_cast<size_t>(cols())}; }
  std::span<const T> row(int64_t r) const {
    return {data_.data() + r * cols(), static_cast<size_t>(cols())};
  }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  T& operator()(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
  const T& operator()(int64_t r, int64_t c) const {
    return data_[static_cast<size_t>(r * cols() + c)];
  }

  void fill(T v);
  bool all_finite() const;
  Tensor reshaped(Shape shape) const;

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T, AlignedAllocator<T>> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace seqslu
