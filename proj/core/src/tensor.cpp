#include "elastoflow/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace elastoflow {

namespace {
int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_product(shape_)), fill) {
  if (shape_.size() > 4) throw std::invalid_argument("Tensor: rank > 4 unsupported");
}

Tensor Tensor::from_fn(std::vector<int64_t> shape, const std::function<double(int64_t)>& f) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = f(i);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::min() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::fmin(m, v);
  return m;
}

double Tensor::max() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::fmax(m, v);
  return m;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

double Tensor::stddev() const {
  if (data_.empty()) return 0.0;
  const double mu = mean();
  double acc = 0.0;
  for (double v : data_) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(data_.size()));
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ")";
  return os.str();
}

int64_t Mask::count() const {
  int64_t n = 0;
  for (uint8_t v : m) n += (v != 0);
  return n;
}

}  // namespace elastoflow
