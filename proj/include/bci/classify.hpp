#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "bci/features.hpp"
#include "bci/types.hpp"

namespace bci {

// 2-bit code emitted per classified movement.
struct DigitalCode {
  std::uint8_t bits = 0;
  bool operator==(const DigitalCode&) const = default;
};

DigitalCode encode_class(MovementClass c);
MovementClass decode_code(DigitalCode code);

struct Classification {
  MovementClass label = MovementClass::OTHER;
  double distance = 0.0;  // squared
};

struct NnModel {
  Matrix exemplars;  // one row per exemplar
  std::vector<MovementClass> labels;
  double rejection_threshold = std::numeric_limits<double>::infinity();
  std::uint64_t spec_fingerprint = 0;

  std::size_t dimension() const { return exemplars.cols(); }
};

struct NflModel {
  // Per trainable class (RTR, RTL, WF order): one row per point.
  std::vector<Matrix> class_points;
  std::vector<MovementClass> classes;
  double rejection_threshold = std::numeric_limits<double>::infinity();
  std::uint64_t spec_fingerprint = 0;

  std::size_t dimension() const;
};

using Model = std::variant<NnModel, NflModel>;

double squared_distance(std::span<const double> a, std::span<const double> b);
inline double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  return squared_distance(a.values, b.values);
}

// Linear-interpolation percentile of `values` (p in [0, 100]).
double percentile(std::vector<double> values, double p);

NnModel train_nn(const Matrix& vectors, const std::vector<MovementClass>& labels,
                 double rejection_percentile, std::uint64_t spec_fingerprint = 0);
Classification classify_nn(const NnModel& model, std::span<const double> v);

struct LineProjection {
  double distance = 0.0;  // squared distance from q to the (extended) line
  double mu = 0.0;        // foot = x1 + mu (x2 - x1)
};

LineProjection nfl_line_distance(std::span<const double> q, std::span<const double> x1,
                                 std::span<const double> x2);

NflModel train_nfl(const Matrix& vectors, const std::vector<MovementClass>& labels,
                   double rejection_percentile, std::uint64_t spec_fingerprint = 0);
Classification classify_nfl(const NflModel& model, std::span<const double> v);

Classification classify(const Model& model, std::span<const double> v);
std::uint64_t model_fingerprint(const Model& model);
std::size_t model_dimension(const Model& model);
Model with_threshold(Model model, double tau);

}  // namespace bci
