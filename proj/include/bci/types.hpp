#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bci {

// Movement classes. OTHER is the rejection output and never a training label.
enum class MovementClass : std::uint8_t { RTR = 0, RTL = 1, WF = 2, OTHER = 3 };

inline constexpr std::array<MovementClass, 3> kTrainableClasses{
    MovementClass::RTR, MovementClass::RTL, MovementClass::WF};

inline constexpr std::size_t class_index(MovementClass c) {
  return static_cast<std::size_t>(c);
}

std::string_view to_string(MovementClass c);
MovementClass movement_class_from_string(std::string_view s);

// Dense row-major matrix; for signals rows = channels, cols = time samples.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Thrown when an input violates a documented invariant (NaN samples, shape
// mismatch, out-of-range window, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bci
