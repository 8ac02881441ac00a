#pragma once

#include <numbers>
#include <string>
#include <vector>

namespace nsrds {

inline constexpr double kPi = std::numbers::pi;

// A compact one-dimensional phase space. Points are plain doubles:
//  - Interval:       a coordinate in [lo, hi];
//  - ProjectiveLine: an angle in [0, pi), metric min(|x-y|, pi-|x-y|);
//  - FiniteSet:      a label index 0..n-1 stored as a double.
class PhaseSpace {
 public:
  enum class Kind { kInterval, kProjectiveLine, kFiniteSet };

  static PhaseSpace interval(double lo, double hi);
  static PhaseSpace projective_line();
  static PhaseSpace finite_set(std::vector<std::string> labels,
                               std::vector<std::vector<double>> metric);
  // Two labelled points at distance 1.
  static PhaseSpace two_point(std::string a = "a", std::string b = "b");

  Kind kind() const noexcept { return kind_; }
  bool is_interval() const noexcept { return kind_ == Kind::kInterval; }
  bool is_projective() const noexcept {
    return kind_ == Kind::kProjectiveLine;
  }
  bool is_finite() const noexcept { return kind_ == Kind::kFiniteSet; }

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::vector<double>>& metric() const noexcept {
    return metric_;
  }
  std::size_t size() const noexcept { return labels_.size(); }

  double distance(double x, double y) const;
  double diameter() const;

  // Tolerant membership test (1e-12 slack at interval ends).
  bool contains(double x) const;
  // Snap a point that is within tolerance of the space into it; angles are
  // reduced mod pi.
  double normalize(double x) const;

  std::string describe() const;

  friend bool operator==(const PhaseSpace& a, const PhaseSpace& b);

 private:
  PhaseSpace() = default;

  Kind kind_ = Kind::kInterval;
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<std::string> labels_;
  std::vector<std::vector<double>> metric_;
};

// Reduce an angle into [0, pi).
double wrap_angle(double theta);

}  // namespace nsrds
