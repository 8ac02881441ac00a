#pragma once

#include <algorithm>
#include <optional>
#include <variant>
#include <vector>

#include "nsrds/measures.hpp"
#include "nsrds/phase_space.hpp"

namespace nsrds {

// A bounded real function on a phase space.
class Observable {
 public:
  struct Affine {
    double c0 = 0.0;
    double c1 = 1.0;
  };
  struct Poly {
    std::vector<double> coeffs;  // c0 + c1 x + c2 x^2 + ...
  };
  // cos(2 pi k t) with t the coordinate rescaled to one period of the space.
  struct CosK {
    int k = 1;
  };
  // 1 on the closed arc / interval [from, to], 0 elsewhere.
  struct Indicator {
    double from = 0.0;
    double to = 0.0;
  };
  struct Table {
    std::vector<double> values;
  };
  using Form = std::variant<Affine, Poly, CosK, Indicator, Table>;

  Observable(PhaseSpace space, Form form);

  static Observable constant(PhaseSpace space, double c) {
    return Observable(std::move(space), Affine{c, 0.0});
  }
  static Observable identity(PhaseSpace space) {
    return Observable(std::move(space), Affine{0.0, 1.0});
  }

  double operator()(double x) const;

  const PhaseSpace& space() const noexcept { return space_; }
  const Form& form() const noexcept { return form_; }

  // sup |phi| over the whole space.
  double sup_abs() const;
  // M = max(1, sup |phi|).
  double bound() const { return std::max(1.0, sup_abs()); }
  bool is_constant() const;

 private:
  PhaseSpace space_;
  Form form_;
};

// phi_* mu as a measure on [-M, M]; M defaults to max(1, sup |phi|).
DiscreteMeasure pushforward_observable(const Observable& phi,
                                       const DiscreteMeasure& mu,
                                       std::optional<double> bound = {});

}  // namespace nsrds
