#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace elastoflow {

/// Dense row-major tensor of doubles, rank 0..4. Rank-2 tensors are
/// (axial, lateral) fields; rank-3 are (channel, axial, lateral) stacks;
/// rank-4 hold convolution weights (out, in, kh, kw).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape, double fill = 0.0);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor({1}, v); }
  static Tensor from_fn(std::vector<int64_t> shape, const std::function<double(int64_t)>& f);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Rank-2 access: (row=axial, col=lateral).
  double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

  // Rank-3 access: (channel, row, col).
  double& at(int64_t ch, int64_t r, int64_t c) {
    return data_[static_cast<size_t>((ch * shape_[1] + r) * shape_[2] + c)];
  }
  double at(int64_t ch, int64_t r, int64_t c) const {
    return data_[static_cast<size_t>((ch * shape_[1] + r) * shape_[2] + c)];
  }

  // Rank-4 access.
  double& at4(int64_t o, int64_t i, int64_t kr, int64_t kc) {
    return data_[static_cast<size_t>(((o * shape_[1] + i) * shape_[2] + kr) * shape_[3] + kc)];
  }
  double at4(int64_t o, int64_t i, int64_t kr, int64_t kc) const {
    return data_[static_cast<size_t>(((o * shape_[1] + i) * shape_[2] + kr) * shape_[3] + kc)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  double min() const;
  double max() const;
  double sum() const;
  double mean() const;
  /// Population standard deviation over all entries.
  double stddev() const;

  void fill(double v);
  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

/// Per-pixel boolean field used for outlier/validity masks.
struct Mask {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<uint8_t> m;

  Mask() = default;
  Mask(int64_t r, int64_t c, uint8_t fill = 1)
      : rows(r), cols(c), m(static_cast<size_t>(r * c), fill) {}

  uint8_t& at(int64_t r, int64_t c) { return m[static_cast<size_t>(r * cols + c)]; }
  uint8_t at(int64_t r, int64_t c) const { return m[static_cast<size_t>(r * cols + c)]; }
  int64_t size() const { return rows * cols; }
  int64_t count() const;
  double fraction() const { return size() == 0 ? 0.0 : static_cast<double>(count()) / static_cast<double>(size()); }
};

}  // namespace elastoflow
