#include "sosflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sosflow/error.hpp"

namespace sosflow {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }
double normal_log_pdf(double x) {
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Fritsch-Carlson slopes for a monotone cubic Hermite interpolant.
std::vector<double> monotone_slopes(const std::vector<double>& x,
                                    const std::vector<double>& y) {
  const size_t n = x.size();
  std::vector<double> delta(n - 1), m(n, 0.0);
  for (size_t i = 0; i + 1 < n; ++i)
    delta[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  m[0] = delta[0];
  m[n - 1] = delta[n - 2];
  for (size_t i = 1; i + 1 < n; ++i)
    m[i] = delta[i - 1] * delta[i] <= 0.0 ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
  for (size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0.0) {
      m[i] = m[i + 1] = 0.0;
      continue;
    }
    const double a = m[i] / delta[i];
    const double b = m[i + 1] / delta[i];
    const double s = a * a + b * b;
    if (s > 9.0) {
      const double tau = 3.0 / std::sqrt(s);
      m[i] = tau * a * delta[i];
      m[i + 1] = tau * b * delta[i];
    }
  }
  return m;
}

}  // namespace

void GmmSpec::validate() const {
  if (weights.empty() || weights.size() != means.size() ||
      weights.size() != sds.size())
    throw Error(ErrorKind::kInvalidConfig,
                "mixture needs matching, non-empty weights/means/sds");
  double total = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !(sds[i] > 0.0) || !std::isfinite(means[i]))
      throw Error(ErrorKind::kInvalidConfig,
                  "mixture weights must be >= 0 and sds > 0");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw Error(ErrorKind::kInvalidConfig, "mixture weights must sum to 1");
}

double GmmSpec::pdf(double x) const { return std::exp(log_pdf(x)); }

double GmmSpec::log_pdf(double x) const {
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    const double u = (x - means[i]) / sds[i];
    terms[i] = std::log(weights[i]) + normal_log_pdf(u) - std::log(sds[i]);
    top = std::max(top, terms[i]);
  }
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

double GmmSpec::cdf(double x) const {
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i)
    acc += weights[i] * normal_cdf((x - means[i]) / sds[i]);
  return std::min(acc, 1.0);
}

double GmmSpec::sf(double x) const {
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i)
    acc += weights[i] * normal_sf((x - means[i]) / sds[i]);
  return std::min(acc, 1.0);
}

GmmSpec GmmSpec::single(double mean, double sd) { return {{1.0}, {mean}, {sd}}; }

GmmSpec GmmSpec::three_component() {
  return {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {-5.0, 0.0, 5.0}, {1.0, 1.0, 1.0}};
}

GmmSpec GmmSpec::five_component() {
  return {{0.2, 0.2, 0.2, 0.2, 0.2},
          {-5.0, -2.0, 0.0, 2.0, 5.0},
          {std::sqrt(1.5), std::sqrt(2.0), 1.0, std::sqrt(2.0), 1.0}};
}

std::vector<double> erf_coeffs(int K) {
  if (K < 0) throw Error(ErrorKind::kInvalidConfig, "K must be >= 0");
  std::vector<double> c(static_cast<size_t>(K) + 1, 0.0);
  c[0] = 1.0;
  for (int k = 1; k <= K; ++k) {
    double acc = 0.0;
    for (int m = 0; m < k; ++m)
      acc += c[static_cast<size_t>(m)] * c[static_cast<size_t>(k - 1 - m)] /
             ((m + 1.0) * (2.0 * m + 1.0));
    c[static_cast<size_t>(k)] = acc;
  }
  return c;
}

double uniform_to_normal_series(double mu, double sigma, double z, int K) {
  if (!(z > 0.0 && z < 1.0))
    throw Error(ErrorKind::kDomain, "uniform_to_normal needs 0 < z < 1");
  if (!(sigma > 0.0)) throw Error(ErrorKind::kDomain, "sigma must be > 0");
  const auto c = erf_coeffs(K);
  const double t = z - 0.5;
  const double w = std::numbers::pi * t * t;
  // sum_k c_k / (2k+1) * w^k, highest order first
  double acc = 0.0;
  for (int k = K; k >= 0; --k)
    acc = acc * w + c[static_cast<size_t>(k)] / (2.0 * k + 1.0);
  const double series = std::sqrt(std::numbers::pi) * t * acc;
  return mu + std::numbers::sqrt2 * sigma * series;
}

double normal_to_uniform_series(double mu, double sigma, double x, int K) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::kDomain, "sigma must be > 0");
  if (K < 0) throw Error(ErrorKind::kInvalidConfig, "K must be >= 0");
  const double y = (x - mu) / (std::numbers::sqrt2 * sigma);
  const double y2 = y * y;
  double term = y;  // (-1)^k y^{2k+1} / k!
  double acc = term;
  for (int k = 1; k <= K; ++k) {
    term *= -y2 / k;
    acc += term / (2.0 * k + 1.0);
  }
  return 0.5 + acc / std::sqrt(std::numbers::pi);
}

namespace {

const Cdf1D& standard_normal_table() {
  static const Cdf1D table = Cdf1D::normal(0.0, 1.0);
  return table;
}

}  // namespace

double uniform_to_normal(double mu, double sigma, double z, int K) {
  if (std::abs(z - 0.5) <= kSeriesUniformHalfWidth || !(z > 0.0 && z < 1.0) ||
      !(sigma > 0.0))
    return uniform_to_normal_series(mu, sigma, z, K);
  const Cdf1D& table = standard_normal_table();
  // 1 - z is exact for z >= 1/2.
  const double q = z < 0.5 ? table.quantile(z) : table.upper_quantile(1.0 - z);
  return mu + sigma * q;
}

double normal_to_uniform(double mu, double sigma, double x, int K) {
  if (!(sigma > 0.0) || K < 0 ||
      std::abs(x - mu) <= kSeriesNormalHalfWidth * sigma)
    return normal_to_uniform_series(mu, sigma, x, K);
  return standard_normal_table().cdf((x - mu) / sigma);
}

Cdf1D Cdf1D::tabulate(Handles handles, double lo, double hi, int points) {
  if (!(hi > lo) || points < 2)
    throw Error(ErrorKind::kInvalidConfig, "tabulation needs lo < hi, >= 2 points");
  Cdf1D out;
  out.h_ = std::move(handles);
  out.grid_.resize(static_cast<size_t>(points));
  out.cdf_.resize(static_cast<size_t>(points));
  out.sf_.resize(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / (points - 1);
    out.grid_[static_cast<size_t>(i)] = x;
    out.cdf_[static_cast<size_t>(i)] = out.h_.cdf(x);
    out.sf_[static_cast<size_t>(i)] = out.h_.sf(x);
  }
  for (size_t i = 1; i < out.cdf_.size(); ++i)
    out.cdf_[i] = std::max(out.cdf_[i], out.cdf_[i - 1]);
  out.slopes_ = monotone_slopes(out.grid_, out.cdf_);
  return out;
}

Cdf1D Cdf1D::gaussian_mixture(const GmmSpec& spec, int points) {
  spec.validate();
  const double max_sd = *std::max_element(spec.sds.begin(), spec.sds.end());
  const double lo =
      *std::min_element(spec.means.begin(), spec.means.end()) - 8.0 * max_sd;
  const double hi =
      *std::max_element(spec.means.begin(), spec.means.end()) + 8.0 * max_sd;
  Handles h;
  h.pdf = [spec](double x) { return spec.pdf(x); };
  h.cdf = [spec](double x) { return spec.cdf(x); };
  h.sf = [spec](double x) { return spec.sf(x); };
  return tabulate(std::move(h), lo, hi, points);
}

Cdf1D Cdf1D::normal(double mean, double sd) {
  return gaussian_mixture(GmmSpec::single(mean, sd));
}

Cdf1D Cdf1D::uniform(double lo, double hi) {
  if (!(hi > lo)) throw Error(ErrorKind::kInvalidConfig, "uniform needs lo < hi");
  const double width = hi - lo;
  Handles h;
  h.pdf = [=](double x) { return x >= lo && x <= hi ? 1.0 / width : 0.0; };
  h.cdf = [=](double x) { return std::clamp((x - lo) / width, 0.0, 1.0); };
  h.sf = [=](double x) { return std::clamp((hi - x) / width, 0.0, 1.0); };
  h.support_lo = lo;
  h.support_hi = hi;
  return tabulate(std::move(h), lo, hi, kDefaultPoints);
}

double Cdf1D::interpolate(double x) const {
  if (x <= grid_.front()) return cdf_.front();
  if (x >= grid_.back()) return cdf_.back();
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  const size_t i = static_cast<size_t>(it - grid_.begin()) - 1;
  const double h = grid_[i + 1] - grid_[i];
  const double t = (x - grid_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double y = cdf_[i] + (-2 * t3 + 3 * t2) * (cdf_[i + 1] - cdf_[i]) +
                   h * ((t3 - 2 * t2 + t) * slopes_[i] + (t3 - t2) * slopes_[i + 1]);
  // Keeps rounding from breaking monotonicity on nearly flat stretches.
  return std::clamp(y, cdf_[i], cdf_[i + 1]);
}

double Cdf1D::quantile(double u) const {
  if (std::isnan(u)) throw Error(ErrorKind::kDomain, "quantile of NaN");
  if (u <= 0.0) return h_.support_lo;
  if (u >= 1.0) return h_.support_hi;
  return solve(u, false);
}

double Cdf1D::upper_quantile(double s) const {
  if (std::isnan(s)) throw Error(ErrorKind::kDomain, "quantile of NaN");
  if (s <= 0.0) return h_.support_hi;
  if (s >= 1.0) return h_.support_lo;
  return solve(s, true);
}

// Finds the smallest x with g(x) >= target where g = cdf (lower) or
// g = -sf (upper); both are nondecreasing with derivative pdf.
double Cdf1D::solve(double target_in, bool upper) const {
  const double target = upper ? -target_in : target_in;
  auto g = [&](double x) { return upper ? -h_.sf(x) : h_.cdf(x); };
  auto table = [&](size_t i) { return upper ? -sf_[i] : cdf_[i]; };
  const size_t n = grid_.size();
  const double span = grid_.back() - grid_.front();

  double a, b;  // invariant: g(a) < target <= g(b)
  if (target <= table(0)) {
    b = grid_.front();
    double step = span;
    a = std::max(b - step, h_.support_lo);
    while (g(a) >= target) {
      if (a <= h_.support_lo) return h_.support_lo;
      b = a;
      step *= 2.0;
      a = std::max(a - step, h_.support_lo);
      if (!std::isfinite(a))
        throw Error(ErrorKind::kNoConvergence, "quantile bracket diverged");
    }
  } else if (target > table(n - 1)) {
    a = grid_.back();
    double step = span;
    b = std::min(a + step, h_.support_hi);
    while (g(b) < target) {
      if (b >= h_.support_hi) return h_.support_hi;
      a = b;
      step *= 2.0;
      b = std::min(b + step, h_.support_hi);
      if (!std::isfinite(b))
        throw Error(ErrorKind::kNoConvergence, "quantile bracket diverged");
    }
  } else {
    size_t lo = 0, hi = n - 1;  // table(lo) < target <= table(hi)
    while (hi - lo > 1) {
      const size_t mid = (lo + hi) / 2;
      (table(mid) < target ? lo : hi) = mid;
    }
    a = grid_[lo];
    b = grid_[hi];
  }

  // Starting point from the monotone interpolant (lower) or a secant.
  double x = 0.5 * (a + b);
  if (!upper && a >= grid_.front() && b <= grid_.back()) {
    double ia = a, ib = b;
    for (int it = 0; it < 40; ++it) {
      const double m = 0.5 * (ia + ib);
      (interpolate(m) < target ? ia : ib) = m;
    }
    x = 0.5 * (ia + ib);
  }

  const double tol = 4.0 * std::numeric_limits<double>::epsilon() *
                     std::abs(target);
  for (int it = 0; it < 400; ++it) {
    const double f = g(x) - target;
    if (f >= 0.0)
      b = x;
    else
      a = x;
    if (std::abs(f) <= tol) return x;
    if (std::nextafter(a, b) >= b) return b;
    const double slope = h_.pdf(x);
    double next = slope > 0.0 ? x - f / slope : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    x = next;
  }
  return x;
}

double kr_map_1d(const Cdf1D& source, const Cdf1D& target, double z) {
  if (!std::isfinite(z) || z < source.support_lo() || z > source.support_hi())
    throw Error(ErrorKind::kDomain, "z is outside the source support");
  const double u = source.cdf(z);
  if (u <= 0.5) {
    if (u <= 0.0 && !std::isfinite(target.support_lo()))
      throw Error(ErrorKind::kDomain, "z lies beyond the representable tail");
    return target.quantile(u);
  }
  const double s = source.sf(z);
  if (s <= 0.0 && !std::isfinite(target.support_hi()))
    throw Error(ErrorKind::kDomain, "z lies beyond the representable tail");
  return target.upper_quantile(s);
}

GmmMapAnalysis analyze_gmm_map(const GmmSpec& target,
                               std::span<const double> grid, double factor) {
  target.validate();
  if (grid.empty()) throw Error(ErrorKind::kInvalidConfig, "empty grid");
  if (!(factor > 0.0)) throw Error(ErrorKind::kInvalidConfig, "factor must be > 0");
  const Cdf1D source = Cdf1D::normal(0.0, 1.0);
  const Cdf1D dest = Cdf1D::gaussian_mixture(target);

  GmmMapAnalysis out;
  out.grid.assign(grid.begin(), grid.end());
  for (double z : grid) {
    const double t = kr_map_1d(source, dest, z);
    out.transport.push_back(t);
    out.slopes.push_back(std::exp(normal_log_pdf(z) - target.log_pdf(t)));
  }
  std::vector<double> sorted = out.slopes;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  out.median_slope =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  out.threshold = factor * out.median_slope;
  out.left_slope = out.slopes.front();
  out.right_slope = out.slopes.back();

  bool open = false;
  for (size_t i = 0; i < n; ++i) {
    if (out.slopes[i] > out.threshold) {
      if (!open) out.jumps.push_back({grid[i], grid[i]});
      out.jumps.back().z_hi = grid[i];
      open = true;
    } else {
      open = false;
    }
  }
  return out;
}

void write_curve_csv(std::ostream& out, std::span<const double> z,
                     std::span<const double> t,
                     std::span<const double> oracle) {
  if (z.size() != t.size() || (!oracle.empty() && oracle.size() != z.size()))
    throw Error(ErrorKind::kDimensionMismatch, "curve columns differ in length");
  const auto old = out.precision(17);
  out << (oracle.empty() ? "z,T\n" : "z,T,T_oracle\n");
  for (size_t i = 0; i < z.size(); ++i) {
    out << z[i] << ',' << t[i];
    if (!oracle.empty()) out << ',' << oracle[i];
    out << '\n';
  }
  out.precision(old);
}

}  // namespace sosflow
