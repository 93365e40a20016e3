// The positive profile function A(lambda) on [a_n, a_0] that, together with
// the spectrum, determines the manifold.  Four kinds are supported: constant,
// sqrt (the ellipsoid), polynomial, and tabulated-with-spline.  Derivatives
// are exact for the first three kinds; the tabulated kind differentiates its
// spline (orders 0..2) and falls back to central differences beyond that.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "liouville/numerics.hpp"

namespace liouville {

class WrongProfile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AProfile {
 public:
  enum class Kind { Constant, Sqrt, Polynomial, Tabulated };

  static AProfile constant(double c) {
    AProfile p;
    p.kind_ = Kind::Constant;
    p.c_ = c;
    return p;
  }
  static AProfile sqrt_profile() {
    AProfile p;
    p.kind_ = Kind::Sqrt;
    return p;
  }
  // Ascending coefficients: A(l) = coeffs[0] + coeffs[1] l + ...
  static AProfile polynomial(std::vector<double> coeffs) {
    AProfile p;
    p.kind_ = Kind::Polynomial;
    p.coeffs_ = std::move(coeffs);
    return p;
  }
  static AProfile tabulated(std::vector<double> lambda, std::vector<double> values) {
    AProfile p;
    p.kind_ = Kind::Tabulated;
    p.spline_ = CubicSpline(std::move(lambda), std::move(values));
    return p;
  }

  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::Constant; }
  bool is_sqrt() const { return kind_ == Kind::Sqrt; }

  double value(double l) const { return derivative(0, l); }

  double derivative(int k, double l) const {
    switch (kind_) {
      case Kind::Constant:
        return k == 0 ? c_ : 0.0;
      case Kind::Sqrt: {
        if (k == 0) return std::sqrt(l);
        double coef = 1.0;
        for (int j = 0; j < k; ++j) coef *= 0.5 - j;
        return coef * std::pow(l, 0.5 - k);
      }
      case Kind::Polynomial: {
        double s = 0.0;
        for (std::size_t m = coeffs_.size(); m-- > static_cast<std::size_t>(k);) {
          double fall = 1.0;
          for (int j = 0; j < k; ++j) fall *= static_cast<double>(m - j);
          s = s * l + coeffs_[m] * fall;
        }
        return s;
      }
      case Kind::Tabulated: {
        if (k == 0) return spline_(l);
        if (k == 1) return spline_.derivative(l);
        const double h = 1e-4 * (spline_.back() - spline_.front());
        return (derivative(k - 1, l + h) - derivative(k - 1, l - h)) / (2.0 * h);
      }
    }
    return 0.0;
  }

  // Atilde(l) = (l - a_n) A(l) and its derivatives, the object of the
  // monotonicity condition.
  double tilde_derivative(int k, double l, double a_n) const {
    if (k == 0) return (l - a_n) * value(l);
    return (l - a_n) * derivative(k, l) + k * derivative(k - 1, l);
  }

  std::string kind_name() const {
    switch (kind_) {
      case Kind::Constant: return "constant";
      case Kind::Sqrt: return "sqrt";
      case Kind::Polynomial: return "polynomial";
      case Kind::Tabulated: return "tabulated";
    }
    return "?";
  }

  double constant_value() const { return c_; }
  const std::vector<double>& poly_coeffs() const { return coeffs_; }

 private:
  Kind kind_ = Kind::Sqrt;
  double c_ = 1.0;
  std::vector<double> coeffs_;
  CubicSpline spline_;
};

}  // namespace liouville
