#pragma once

#include <span>

#include <Eigen/Dense>

namespace sosflow {

// Coefficients of one increasing polynomial
//
//   T(z) = c + int_0^z sum_kappa ( sum_l a(kappa, l) u^l )^2 du
//
// `a` is k x (r+1): row kappa holds the coefficients of the kappa-th squared
// polynomial in increasing powers of u.
struct SosCoeffs {
  Eigen::MatrixXd a;
  double c = 0.0;

  int k() const { return static_cast<int>(a.rows()); }
  int r() const { return static_cast<int>(a.cols()) - 1; }
  bool is_constant() const { return (a.array() == 0.0).all(); }

  // k = 1, r = 0, a = [[1]]: the identity map.
  static SosCoeffs identity(int k = 1, int r = 0);
};

// Expanded antiderivative T(z) = c + sum_{m=0}^{2r} b_m z^{m+1} / (m+1).
struct MonoPoly {
  Eigen::VectorXd b;
  double c = 0.0;

  int degree() const { return static_cast<int>(b.size()); }
};

MonoPoly expand(const SosCoeffs& coeffs);

double eval(const MonoPoly& poly, double z);

// Sum of squares evaluated from the raw coefficients; never negative.
double deriv(const SosCoeffs& coeffs, double z);

// log(max(deriv, kDerivFloor)). The floor never touches the forward map.
double log_deriv(const SosCoeffs& coeffs, double z);

inline constexpr double kDerivFloor = 1e-12;
inline constexpr int kDefaultInvertIterations = 200;

// Solves eval(expand(coeffs), z) = x for z.
//
// The bracket starts at [-1, 1] and doubles until it encloses x, bisection
// narrows it to width 1e-3, and safeguarded Newton steps finish the job. The
// iteration stops once |T(z) - x| <= tol or the bracket has collapsed to
// adjacent doubles (the best achievable answer in floating point).
//
// Throws NotInvertible when a == 0 and NoConvergence when `max_iter` steps
// are exhausted.
double invert(const SosCoeffs& coeffs, double x, double tol,
              int max_iter = kDefaultInvertIterations);
double invert(const SosCoeffs& coeffs, const MonoPoly& poly, double x,
              double tol, int max_iter = kDefaultInvertIterations);

namespace sos {

// Flat kernels used by the flow. A coefficient block is laid out as the k
// rows of `a` (row-major, k * (r+1) values) followed by the offset c.
inline int block_size(int k, int r) { return k * (r + 1) + 1; }

struct PointValue {
  double z = 0.0;          // T(x)
  double deriv = 0.0;      // T'(x)
  double log_deriv = 0.0;  // log(max(T'(x), kDerivFloor))
  double dlog_dx = 0.0;    // d/dx log T'(x); zero when floored
  bool floored = false;
};

PointValue forward(std::span<const double> block, int k, int r, double x);

// Accumulates into `grad_block` the gradient of  gz * T(x) + glog * log T'(x)
// with respect to the coefficient block and returns its derivative with
// respect to x.
double backward(std::span<const double> block, int k, int r, double x,
                const PointValue& value, double gz, double glog,
                std::span<double> grad_block);

SosCoeffs unpack(std::span<const double> block, int k, int r);

}  // namespace sos

}  // namespace sosflow
