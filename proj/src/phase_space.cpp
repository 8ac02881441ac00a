#include "nsrds/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nsrds/error.hpp"

namespace nsrds {

namespace {
constexpr double kMembershipSlack = 1e-12;
}

double wrap_angle(double theta) {
  double r = std::fmod(theta, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r = 0.0;
  return r;
}

PhaseSpace PhaseSpace::interval(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw Error(ErrorKind::kInput, "interval requires finite lo < hi");
  }
  PhaseSpace s;
  s.kind_ = Kind::kInterval;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

PhaseSpace PhaseSpace::projective_line() {
  PhaseSpace s;
  s.kind_ = Kind::kProjectiveLine;
  s.lo_ = 0.0;
  s.hi_ = kPi;
  return s;
}

PhaseSpace PhaseSpace::finite_set(std::vector<std::string> labels,
                                  std::vector<std::vector<double>> metric) {
  const std::size_t n = labels.size();
  if (n == 0) throw Error(ErrorKind::kInput, "finite set needs labels");
  if (metric.size() != n) {
    throw Error(ErrorKind::kInput, "metric table must be n x n");
  }
  for (const auto& row : metric) {
    if (row.size() != n) {
      throw Error(ErrorKind::kInput, "metric table must be n x n");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (metric[i][i] != 0.0) {
      throw Error(ErrorKind::kInput, "metric table diagonal must be zero");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!(metric[i][j] >= 0.0) || metric[i][j] != metric[j][i]) {
        throw Error(ErrorKind::kInput,
                    "metric table must be symmetric and nonnegative");
      }
      if (i != j && metric[i][j] == 0.0) {
        throw Error(ErrorKind::kInput,
                    "metric table must separate distinct labels");
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (metric[i][k] > metric[i][j] + metric[j][k] + 1e-12) {
          throw Error(ErrorKind::kInput,
                      "metric table violates the triangle inequality");
        }
      }
    }
  }
  PhaseSpace s;
  s.kind_ = Kind::kFiniteSet;
  s.lo_ = 0.0;
  s.hi_ = static_cast<double>(n - 1);
  s.labels_ = std::move(labels);
  s.metric_ = std::move(metric);
  return s;
}

PhaseSpace PhaseSpace::two_point(std::string a, std::string b) {
  return finite_set({std::move(a), std::move(b)}, {{0.0, 1.0}, {1.0, 0.0}});
}

double PhaseSpace::distance(double x, double y) const {
  switch (kind_) {
    case Kind::kInterval:
      return std::abs(x - y);
    case Kind::kProjectiveLine: {
      const double d = std::abs(x - y);
      return std::min(d, kPi - d);
    }
    case Kind::kFiniteSet:
      return metric_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
  }
  return 0.0;
}

double PhaseSpace::diameter() const {
  switch (kind_) {
    case Kind::kInterval:
      return hi_ - lo_;
    case Kind::kProjectiveLine:
      return kPi / 2.0;
    case Kind::kFiniteSet: {
      double d = 0.0;
      for (const auto& row : metric_) {
        for (double v : row) d = std::max(d, v);
      }
      return d;
    }
  }
  return 0.0;
}

bool PhaseSpace::contains(double x) const {
  if (!std::isfinite(x)) return false;
  switch (kind_) {
    case Kind::kInterval:
      return x >= lo_ - kMembershipSlack && x <= hi_ + kMembershipSlack;
    case Kind::kProjectiveLine:
      return x >= -kMembershipSlack && x < kPi + kMembershipSlack;
    case Kind::kFiniteSet: {
      if (x < 0.0 || x != std::floor(x)) return false;
      return static_cast<std::size_t>(x) < labels_.size();
    }
  }
  return false;
}

double PhaseSpace::normalize(double x) const {
  switch (kind_) {
    case Kind::kInterval:
      return std::clamp(x, lo_, hi_);
    case Kind::kProjectiveLine:
      return wrap_angle(x);
    case Kind::kFiniteSet:
      return x;
  }
  return x;
}

std::string PhaseSpace::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kInterval:
      os << "interval[" << lo_ << ", " << hi_ << "]";
      break;
    case Kind::kProjectiveLine:
      os << "projective_line";
      break;
    case Kind::kFiniteSet:
      os << "finite_set(" << labels_.size() << ")";
      break;
  }
  return os.str();
}

bool operator==(const PhaseSpace& a, const PhaseSpace& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case PhaseSpace::Kind::kInterval:
      return a.lo_ == b.lo_ && a.hi_ == b.hi_;
    case PhaseSpace::Kind::kProjectiveLine:
      return true;
    case PhaseSpace::Kind::kFiniteSet:
      return a.labels_ == b.labels_ && a.metric_ == b.metric_;
  }
  return false;
}

}  // namespace nsrds
