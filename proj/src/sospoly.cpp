#include "sosflow/sospoly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sosflow/error.hpp"

namespace sosflow {

namespace {

constexpr int kMaxDegree = 64;

// b_m = sum_kappa sum_{l1 + l2 = m} a(kappa, l1) a(kappa, l2)
void convolve_squares(const double* a, int k, int r, double* b) {
  const int n = 2 * r + 1;
  std::fill(b, b + n, 0.0);
  for (int kappa = 0; kappa < k; ++kappa) {
    const double* row = a + kappa * (r + 1);
    for (int l1 = 0; l1 <= r; ++l1) {
      for (int l2 = 0; l2 <= r; ++l2) b[l1 + l2] += row[l1] * row[l2];
    }
  }
}

// Compensated Horner scheme (error-free transformations via fma) for
// c + sum_m b_m z^{m+1} / (m+1). The result is as accurate as plain Horner
// in twice the working precision, which keeps the map numerically monotone
// near points where T' vanishes.
double horner_antiderivative(const double* b, int n, double c, double z) {
  double s = b[n - 1] / n;
  double corr = 0.0;
  for (int m = n - 2; m >= -1; --m) {
    const double coef = m >= 0 ? b[m] / (m + 1) : c;
    const double prod = s * z;
    const double prod_err = std::fma(s, z, -prod);
    const double sum = prod + coef;
    const double bb = sum - prod;
    const double sum_err = (prod - (sum - bb)) + (coef - bb);
    s = sum;
    corr = corr * z + (prod_err + sum_err);
  }
  const double out = s + corr;
  if (std::isfinite(out)) return out;
  // Overflow: the error terms are inf - inf; plain Horner gives the signed
  // infinity.
  double plain = 0.0;
  for (int m = n - 1; m >= 0; --m) plain = plain * z + b[m] / (m + 1);
  return c + plain * z;
}

// Evaluates p(z) and p'(z) for one row of coefficients.
void horner_with_derivative(const double* row, int r, double z, double& p,
                            double& dp) {
  p = row[r];
  dp = 0.0;
  for (int l = r - 1; l >= 0; --l) {
    dp = dp * z + p;
    p = p * z + row[l];
  }
}

double sum_of_squares(const double* a, int k, int r, double z) {
  double total = 0.0;
  for (int kappa = 0; kappa < k; ++kappa) {
    const double* row = a + kappa * (r + 1);
    double p = row[r];
    for (int l = r - 1; l >= 0; --l) p = p * z + row[l];
    total += p * p;
  }
  return total;
}

std::vector<double> row_major(const Eigen::MatrixXd& a) {
  std::vector<double> out(static_cast<size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out[static_cast<size_t>(i * a.cols() + j)] = a(i, j);
  return out;
}

}  // namespace

SosCoeffs SosCoeffs::identity(int k, int r) {
  SosCoeffs coeffs;
  coeffs.a = Eigen::MatrixXd::Zero(k, r + 1);
  coeffs.a.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(k)));
  return coeffs;
}

MonoPoly expand(const SosCoeffs& coeffs) {
  const int k = coeffs.k();
  const int r = coeffs.r();
  const auto a = row_major(coeffs.a);
  MonoPoly poly;
  poly.b.resize(2 * r + 1);
  convolve_squares(a.data(), k, r, poly.b.data());
  poly.c = coeffs.c;
  return poly;
}

double eval(const MonoPoly& poly, double z) {
  return horner_antiderivative(poly.b.data(), poly.degree(), poly.c, z);
}

double deriv(const SosCoeffs& coeffs, double z) {
  const auto a = row_major(coeffs.a);
  return sum_of_squares(a.data(), coeffs.k(), coeffs.r(), z);
}

double log_deriv(const SosCoeffs& coeffs, double z) {
  return std::log(std::max(deriv(coeffs, z), kDerivFloor));
}

double invert(const SosCoeffs& coeffs, double x, double tol, int max_iter) {
  return invert(coeffs, expand(coeffs), x, tol, max_iter);
}

double invert(const SosCoeffs& coeffs, const MonoPoly& poly, double x,
              double tol, int max_iter) {
  if (coeffs.is_constant())
    throw Error(ErrorKind::kNotInvertible, "polynomial is constant (a == 0)");
  if (!(tol > 0.0))
    throw Error(ErrorKind::kInvalidConfig, "inversion tolerance must be > 0");
  if (!std::isfinite(x))
    throw Error(ErrorKind::kNonFinite, "cannot invert at a non-finite value");

  const auto a = row_major(coeffs.a);
  const int k = coeffs.k();
  const int r = coeffs.r();
  auto residual = [&](double z) { return eval(poly, z) - x; };

  int iter = 0;
  auto tick = [&] {
    if (++iter > max_iter)
      throw Error(ErrorKind::kNoConvergence,
                  "inversion exceeded " + std::to_string(max_iter) +
                      " iterations");
  };

  double lo = -1.0;
  double hi = 1.0;
  while (residual(lo) > 0.0) {
    tick();
    hi = lo;
    lo *= 2.0;
  }
  while (residual(hi) < 0.0) {
    tick();
    lo = hi;
    hi *= 2.0;
  }

  while (hi - lo > 1e-3) {
    tick();
    const double mid = 0.5 * (lo + hi);
    const double f = residual(mid);
    if (f == 0.0) return mid;
    (f < 0.0 ? lo : hi) = mid;
  }

  // Newton polishing: once |f| <= tol the loop keeps going while the steps
  // are still resolvable, so the root is accurate in z and not just in x.
  double z = 0.5 * (lo + hi);
  double best = z;
  double best_abs = std::numeric_limits<double>::infinity();
  for (;;) {
    if (iter >= max_iter && best_abs <= tol) return best;
    tick();
    const double f = residual(z);
    if (std::abs(f) < best_abs) {
      best_abs = std::abs(f);
      best = z;
    }
    if (f == 0.0) return z;
    (f < 0.0 ? lo : hi) = z;
    if (std::nextafter(lo, hi) >= hi) return best;

    const double slope = sum_of_squares(a.data(), k, r, z);
    double next = slope > 0.0 ? z - f / slope : lo;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double resolution =
        4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z));
    if (best_abs <= tol && std::abs(next - z) <= resolution) return best;
    if (next == z) return best;
    z = next;
  }
}

namespace sos {

PointValue forward(std::span<const double> block, int k, int r, double x) {
  const int n = 2 * r + 1;
  if (n > kMaxDegree)
    throw Error(ErrorKind::kInvalidConfig, "polynomial degree too large");
  const double* a = block.data();
  const double c = block[static_cast<size_t>(k * (r + 1))];

  double b[kMaxDegree];
  convolve_squares(a, k, r, b);

  PointValue out;
  out.z = horner_antiderivative(b, n, c, x);
  double d_deriv = 0.0;
  for (int kappa = 0; kappa < k; ++kappa) {
    double p, dp;
    horner_with_derivative(a + kappa * (r + 1), r, x, p, dp);
    out.deriv += p * p;
    d_deriv += 2.0 * p * dp;
  }
  if (out.deriv < kDerivFloor) {
    out.floored = true;
    out.log_deriv = std::log(kDerivFloor);
    out.dlog_dx = 0.0;
  } else {
    out.log_deriv = std::log(out.deriv);
    out.dlog_dx = d_deriv / out.deriv;
  }
  return out;
}

double backward(std::span<const double> block, int k, int r, double x,
                const PointValue& value, double gz, double glog,
                std::span<double> grad_block) {
  const int n = 2 * r + 1;
  const double* a = block.data();

  // x^{m+1} / (m+1) and x^l
  double antider_pow[kMaxDegree];
  double pow_x[kMaxDegree];
  double xp = 1.0;
  for (int m = 0; m < n; ++m) {
    if (m <= r) pow_x[m] = xp;
    xp *= x;
    antider_pow[m] = xp / (m + 1);
  }

  const double log_scale = value.floored ? 0.0 : 2.0 * glog / value.deriv;
  for (int kappa = 0; kappa < k; ++kappa) {
    const double* row = a + kappa * (r + 1);
    double* grow = grad_block.data() + kappa * (r + 1);
    double p = 0.0;
    for (int l = 0; l <= r; ++l) p += row[l] * pow_x[l];
    for (int l = 0; l <= r; ++l) {
      double dz = 0.0;
      for (int l2 = 0; l2 <= r; ++l2) dz += row[l2] * antider_pow[l + l2];
      grow[l] += gz * 2.0 * dz + log_scale * p * pow_x[l];
    }
  }
  grad_block[static_cast<size_t>(k * (r + 1))] += gz;
  return gz * value.deriv + glog * value.dlog_dx;
}

SosCoeffs unpack(std::span<const double> block, int k, int r) {
  SosCoeffs coeffs;
  coeffs.a.resize(k, r + 1);
  for (int kappa = 0; kappa < k; ++kappa)
    for (int l = 0; l <= r; ++l)
      coeffs.a(kappa, l) = block[static_cast<size_t>(kappa * (r + 1) + l)];
  coeffs.c = block[static_cast<size_t>(k * (r + 1))];
  return coeffs;
}

}  // namespace sos

}  // namespace sosflow
