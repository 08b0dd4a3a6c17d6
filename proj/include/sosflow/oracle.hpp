#pragma once

#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

namespace sosflow {

// Univariate Gaussian mixture with standard deviations (not variances).
struct GmmSpec {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sds;

  void validate() const;
  double pdf(double x) const;
  double log_pdf(double x) const;
  double cdf(double x) const;
  double sf(double x) const;

  static GmmSpec single(double mean, double sd);
  // Equal-weight mixture with means (-5, 0, 5), unit variances.
  static GmmSpec three_component();
  // Means (-5, -2, 0, 2, 5), variances (1.5, 2, 1, 2, 1), weights 0.2.
  static GmmSpec five_component();
};

// Series coefficients of the inverse error function: c_0 = 1 and
// c_k = sum_{m<k} c_m c_{k-1-m} / ((m+1)(2m+1)).
std::vector<double> erf_coeffs(int K);

// Truncated Taylor series of mu + sqrt(2) sigma erfinv(2z - 1), the
// increasing map pushing uniform(0,1) to N(mu, sigma^2).
double uniform_to_normal_series(double mu, double sigma, double z, int K = 30);

// Truncated Taylor series of Phi((x - mu) / sigma), the map pushing
// N(mu, sigma^2) to uniform(0,1).
double normal_to_uniform_series(double mu, double sigma, double x, int K = 40);

// Central ranges on which the two maps use the series; outside them the
// tabulated normal distribution is used instead. With the default K the
// series error on these ranges stays below 1e-11.
inline constexpr double kSeriesUniformHalfWidth = 0.35;  // |z - 1/2|
inline constexpr double kSeriesNormalHalfWidth = 3.0;    // |x - mu| / sigma

double uniform_to_normal(double mu, double sigma, double z, int K = 30);
double normal_to_uniform(double mu, double sigma, double x, int K = 40);

// Tabulated distribution function with exact pdf/cdf/sf handles. The table
// seeds the quantile search; refinement always runs against the handles.
class Cdf1D {
 public:
  struct Handles {
    std::function<double(double)> pdf;
    std::function<double(double)> cdf;
    std::function<double(double)> sf;
    double support_lo = -std::numeric_limits<double>::infinity();
    double support_hi = std::numeric_limits<double>::infinity();
  };

  static constexpr int kDefaultPoints = 4096;

  static Cdf1D tabulate(Handles handles, double lo, double hi,
                        int points = kDefaultPoints);
  // Grid over [min mean - 8 max sd, max mean + 8 max sd].
  static Cdf1D gaussian_mixture(const GmmSpec& spec,
                                int points = kDefaultPoints);
  static Cdf1D normal(double mean, double sd);
  static Cdf1D uniform(double lo, double hi);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& cdf_values() const { return cdf_; }
  double support_lo() const { return h_.support_lo; }
  double support_hi() const { return h_.support_hi; }

  double pdf(double x) const { return h_.pdf(x); }
  double cdf(double x) const { return h_.cdf(x); }
  double sf(double x) const { return h_.sf(x); }

  // Monotone piecewise-cubic (Fritsch-Carlson) interpolant of the table.
  double interpolate(double x) const;

  // inf { t : G(t) >= u }.
  double quantile(double u) const;
  // The t with sf(t) = s; accurate where 1 - s rounds to 1.
  double upper_quantile(double s) const;

 private:
  double solve(double target, bool upper) const;

  Handles h_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
  std::vector<double> sf_;
  std::vector<double> slopes_;
};

// Increasing transport G^{-1}(F(z)) between two univariate distributions.
// The upper tail is routed through survival functions.
double kr_map_1d(const Cdf1D& source, const Cdf1D& target, double z);

struct JumpInterval {
  double z_lo = 0.0;
  double z_hi = 0.0;
};

struct GmmMapAnalysis {
  std::vector<double> grid;
  std::vector<double> transport;  // T(z)
  std::vector<double> slopes;     // T'(z) = p(z) / q(T(z))
  double left_slope = 0.0;
  double right_slope = 0.0;
  double median_slope = 0.0;
  double threshold = 0.0;
  std::vector<JumpInterval> jumps;
};

inline constexpr double kJumpFactor = 50.0;

// Transport from N(0, 1) to `target` on `grid`; jump intervals are maximal
// runs of grid points whose slope exceeds factor * median slope.
GmmMapAnalysis analyze_gmm_map(const GmmSpec& target,
                               std::span<const double> grid,
                               double factor = kJumpFactor);

// Writes "z,T" (or "z,T,T_oracle" when `oracle` is non-empty) rows.
void write_curve_csv(std::ostream& out, std::span<const double> z,
                     std::span<const double> t,
                     std::span<const double> oracle = {});

}  // namespace sosflow
