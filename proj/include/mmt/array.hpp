#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmt {

// Error hierarchy. The CLI maps these onto exit codes, everything else just
// lets them propagate.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ValueError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct TrainError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major array of doubles. This is the only value carrier in the
// toolkit; rank 1 arrays are vectors, rank 2 arrays are matrices, shape {1}
// is a scalar.
class DenseArray {
 public:
  DenseArray() = default;

  explicit DenseArray(Shape shape)
      : shape_(std::move(shape)), values_(shape_numel(shape_), 0.0) {
    check_shape();
  }

  DenseArray(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (shape_numel(shape_) != values_.size()) {
      throw ShapeError("DenseArray: shape " + shape_str(shape_) + " wants " +
                       std::to_string(shape_numel(shape_)) + " values, got " +
                       std::to_string(values_.size()));
    }
  }

  static DenseArray zeros(Shape shape) { return DenseArray(std::move(shape)); }

  static DenseArray full(Shape shape, double v) {
    DenseArray a(std::move(shape));
    for (auto& x : a.values_) x = v;
    return a;
  }

  static DenseArray scalar(double v) { return DenseArray({1}, {v}); }

  static DenseArray vector(std::vector<double> v) {
    Shape s{v.size()};
    return DenseArray(std::move(s), std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // rank-2 accessors
  std::size_t rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? 1 : 0); }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const DenseArray& other) const { return shape_ == other.shape_; }
  bool is_scalar() const { return size() == 1; }

  double scalar_value() const {
    if (!is_scalar()) throw ShapeError("scalar_value on array of shape " + shape_str(shape_));
    return values_[0];
  }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) {
    for (auto& x : values_) x = v;
  }

  // extract row r of a rank-2 array as a rank-1 array
  DenseArray row(std::size_t r) const {
    if (rank() != 2) throw ShapeError("row() on array of shape " + shape_str(shape_));
    std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(r * shape_[1]),
                          values_.begin() + static_cast<std::ptrdiff_t>((r + 1) * shape_[1]));
    return DenseArray::vector(std::move(v));
  }

  bool operator==(const DenseArray& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }
  bool operator!=(const DenseArray& other) const { return !(*this == other); }

 private:
  void check_shape() const {
    for (auto d : shape_)
      if (d == 0) throw ShapeError("DenseArray: zero dimension in shape " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<double> values_;
};

}  // namespace mmt
