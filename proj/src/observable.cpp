#include "nsrds/observable.hpp"

#include <algorithm>
#include <cmath>

#include "nsrds/error.hpp"

namespace nsrds {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

// max |p| on [lo, hi]: endpoints plus every sign change of p' located by a
// grid scan and refined by bisection.
double poly_sup_abs(const std::vector<double>& c, double lo, double hi) {
  double best = std::max(std::abs(horner(c, lo)), std::abs(horner(c, hi)));
  if (c.size() < 3) return best;
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) {
    d[i - 1] = static_cast<double>(i) * c[i];
  }
  constexpr int kCells = 4096;
  const double h = (hi - lo) / kCells;
  double x0 = lo;
  double f0 = horner(d, x0);
  for (int k = 1; k <= kCells; ++k) {
    const double x1 = k == kCells ? hi : lo + k * h;
    const double f1 = horner(d, x1);
    if (f0 == 0.0) {
      best = std::max(best, std::abs(horner(c, x0)));
    } else if ((f0 < 0.0) != (f1 < 0.0)) {
      double a = x0;
      double b = x1;
      double fa = f0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = horner(d, mid);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      best = std::max(best, std::abs(horner(c, 0.5 * (a + b))));
    }
    x0 = x1;
    f0 = f1;
  }
  return best;
}

double period_coordinate(const PhaseSpace& s, double x) {
  if (s.is_finite()) return x / static_cast<double>(s.size());
  return (x - s.lo()) / (s.hi() - s.lo());
}

}  // namespace

Observable::Observable(PhaseSpace space, Form form)
    : space_(std::move(space)), form_(std::move(form)) {
  if (const auto* t = std::get_if<Table>(&form_)) {
    if (!space_.is_finite() || t->values.size() != space_.size()) {
      throw Error(ErrorKind::kInput,
                  "table observable needs one value per finite-set label");
    }
  }
  if (const auto* p = std::get_if<Poly>(&form_)) {
    if (p->coeffs.empty()) {
      throw Error(ErrorKind::kInput, "polynomial observable needs coefficients");
    }
  }
}

double Observable::operator()(double x) const {
  return std::visit(
      Overloaded{
          [&](const Affine& a) { return a.c0 + a.c1 * x; },
          [&](const Poly& p) { return horner(p.coeffs, x); },
          [&](const CosK& c) {
            return std::cos(2.0 * kPi * c.k * period_coordinate(space_, x));
          },
          [&](const Indicator& ind) {
            if (space_.is_projective()) {
              return wrap_angle(x - ind.from) <= wrap_angle(ind.to - ind.from)
                         ? 1.0
                         : 0.0;
            }
            return x >= ind.from && x <= ind.to ? 1.0 : 0.0;
          },
          [&](const Table& t) {
            return t.values[static_cast<std::size_t>(x)];
          },
      },
      form_);
}

double Observable::sup_abs() const {
  if (space_.is_finite()) {
    double best = 0.0;
    for (std::size_t i = 0; i < space_.size(); ++i) {
      best = std::max(best, std::abs((*this)(static_cast<double>(i))));
    }
    return best;
  }
  const double lo = space_.lo();
  const double hi = space_.hi();
  return std::visit(
      Overloaded{
          [&](const Affine& a) {
            return std::max(std::abs(a.c0 + a.c1 * lo), std::abs(a.c0 + a.c1 * hi));
          },
          [&](const Poly& p) { return poly_sup_abs(p.coeffs, lo, hi); },
          [&](const CosK&) { return 1.0; },
          [&](const Indicator&) { return 1.0; },
          [&](const Table&) { return 0.0; },
      },
      form_);
}

bool Observable::is_constant() const {
  if (space_.is_finite()) {
    const double v0 = (*this)(0.0);
    for (std::size_t i = 1; i < space_.size(); ++i) {
      if ((*this)(static_cast<double>(i)) != v0) return false;
    }
    return true;
  }
  return std::visit(
      Overloaded{
          [](const Affine& a) { return a.c1 == 0.0; },
          [](const Poly& p) {
            return std::all_of(p.coeffs.begin() + 1, p.coeffs.end(),
                               [](double c) { return c == 0.0; });
          },
          [](const CosK& c) { return c.k == 0; },
          [](const Indicator&) { return false; },
          [](const Table&) { return false; },
      },
      form_);
}

DiscreteMeasure pushforward_observable(const Observable& phi,
                                       const DiscreteMeasure& mu,
                                       std::optional<double> bound) {
  if (!(phi.space() == mu.space())) {
    throw Error(ErrorKind::kSpaceMismatch,
                "space mismatch: observable and measure live on different spaces");
  }
  std::vector<double> values(mu.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    values[i] = phi(mu.support()[i]);
    sup = std::max(sup, std::abs(values[i]));
  }
  const double m = bound.value_or(std::max(1.0, std::max(sup, phi.sup_abs())));
  if (sup > m) {
    throw Error(ErrorKind::kInput, "observable exceeds the supplied bound M");
  }
  std::vector<double> w(mu.weights().begin(), mu.weights().end());
  return DiscreteMeasure(PhaseSpace::interval(-m, m), std::move(values),
                         std::move(w));
}

}  // namespace nsrds
