#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sosflow/data.hpp"
#include "sosflow/error.hpp"

namespace sosflow {
namespace {

namespace fs = std::filesystem;
using boost::math::quadrature::gauss_kronrod;

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kUnsupported;
}

class TempFile {
 public:
  explicit TempFile(const std::string& text) {
    path_ = fs::temp_directory_path() /
            ("sosflow_data_" + std::to_string(counter_++) + ".csv");
    std::ofstream(path_) << text;
  }
  ~TempFile() { fs::remove(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

double integrate_1d(const std::function<double(double)>& f, double lo, double hi) {
  return gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-11);
}

// Nested adaptive Gauss-Kronrod over [lo, hi]^2 split at the given breakpoints.
double integrate_2d(const LogDensityFn& logp, std::vector<double> cuts) {
  auto piecewise = [&](const std::function<double(double)>& f) {
    double s = 0.0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) s += integrate_1d(f, cuts[i], cuts[i + 1]);
    return s;
  };
  return piecewise([&](double x1) {
    return piecewise([&](double x2) {
      const double x[2] = {x1, x2};
      return std::exp(logp(x));
    });
  });
}

struct Moments {
  double mean, var, se_mean, se_var;
};

Moments column_moments(const Eigen::MatrixXd& rows, int col) {
  const Eigen::ArrayXd x = rows.col(col).array();
  const double n = static_cast<double>(x.size());
  const double m = x.mean();
  const Eigen::ArrayXd c = x - m;
  const double var = c.square().mean();
  const double m4 = c.square().square().mean();
  return {m, var, std::sqrt(var / n), std::sqrt((m4 - var * var) / n)};
}

TEST(Gen, Gmm3MeanAndVariance) {
  const auto ds = gen("gmm3", 1000000, 1);
  ASSERT_EQ(ds.rows.cols(), 1);
  const auto mo = column_moments(ds.rows, 0);
  EXPECT_NEAR(mo.mean, 0.0, 0.02);
  EXPECT_NEAR(mo.mean, 0.0, 3 * mo.se_mean);
  // 1 + (25 + 0 + 25) / 3.
  EXPECT_NEAR(mo.var, 1.0 + 50.0 / 3.0, 3 * mo.se_var);
}

TEST(Gen, Gmm5MeanAndVariance) {
  const auto ds = gen("gmm5", 1000000, 2);
  const auto mo = column_moments(ds.rows, 0);
  EXPECT_NEAR(mo.mean, 0.0, 0.02);
  EXPECT_NEAR(mo.mean, 0.0, 3 * mo.se_mean);
  // 0.2 * sum(var_i + mu_i^2).
  const double var = 0.2 * ((1.5 + 25) + (2 + 4) + 1 + (2 + 4) + (1 + 25));
  EXPECT_NEAR(mo.var, var, 3 * mo.se_var);
}

TEST(Gen, BananaSquareMarginalVariance) {
  const auto ds = gen("banana_sq", 1000000, 3);
  ASSERT_EQ(ds.rows.cols(), 2);
  EXPECT_NEAR(column_moments(ds.rows, 1).var / 4.0, 1.0, 0.02);
  // E[x1] = 0.25 E[x2^2] = 1.
  const auto m1 = column_moments(ds.rows, 0);
  EXPECT_NEAR(m1.mean, 1.0, 3 * m1.se_mean);
}

TEST(Gen, BananaCubeConditionalMean) {
  const auto ds = gen("banana_cube", 400000, 4);
  const auto m2 = column_moments(ds.rows, 1);
  EXPECT_NEAR(m2.mean, 2.0, 3 * m2.se_mean);
  EXPECT_NEAR(m2.var, 2.0, 3 * m2.se_var);
  // Residual x1 - x2^3 / 3 is N(0, 1.5).
  Eigen::MatrixXd resid(ds.rows.rows(), 1);
  resid.col(0) = ds.rows.col(0).array() - ds.rows.col(1).array().cube() / 3.0;
  const auto mr = column_moments(resid, 0);
  EXPECT_NEAR(mr.mean, 0.0, 3 * mr.se_mean);
  EXPECT_NEAR(mr.var, 1.5, 3 * mr.se_var);
}

TEST(Gen, DeterministicAndSeedSensitive) {
  for (const auto& name : dataset_names()) {
    const auto a = gen(name, 500, 9);
    const auto b = gen(name, 500, 9);
    const auto c = gen(name, 500, 10);
    EXPECT_TRUE((a.rows.array() == b.rows.array()).all()) << name;
    EXPECT_FALSE((a.rows.array() == c.rows.array()).all()) << name;
    EXPECT_TRUE(a.rows.allFinite()) << name;
    EXPECT_EQ(a.rows.cols(), dataset_dim(name));
  }
}

TEST(Gen, UnknownName) {
  EXPECT_EQ(kind_of([] { gen("moons", 10, 0); }), ErrorKind::kUnknownDataset);
  EXPECT_EQ(kind_of([] { true_log_density("moons"); }), ErrorKind::kUnknownDataset);
}

TEST(TrueDensity, BananaSquareByHand) {
  const auto logp = true_log_density("banana_sq");
  const double x[2] = {1.3, -0.8};
  const double x2 = -0.8, x1 = 1.3, m = 0.25 * x2 * x2;
  const double expect = -0.5 * x2 * x2 / 4 - 0.5 * std::log(2 * std::numbers::pi * 4) -
                        0.5 * (x1 - m) * (x1 - m) - 0.5 * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(logp(x), expect, 1e-14);
}

TEST(TrueDensity, OneDimensionalSetsIntegrateToOne) {
  for (const char* name : {"gmm3", "gmm5"}) {
    const auto logp = true_log_density(name);
    const double mass = integrate_1d(
        [&](double x) { return std::exp(logp(std::span<const double>(&x, 1))); }, -30, 30);
    EXPECT_NEAR(mass, 1.0, 0.01) << name;
    EXPECT_NEAR(mass, 1.0, 1e-8) << name;
  }
}

TEST(TrueDensity, TwoDimensionalSetsIntegrateToOne) {
  const std::vector<std::pair<std::string, std::vector<double>>> boxes = {
      {"banana_sq", {-12, -4, 0, 4, 40}},
      {"banana_cube", {-60, -10, 0, 2, 10, 150}},
      {"funnel", {-9, -2, 0, 2, 9}},
      {"square", {-3, -2, 0, 2, 3}},
      {"mog_grid", {-5, -2, 0, 2, 5}},
      {"rings", {-4, -3, -1, 0, 1, 3, 4}},
  };
  for (const auto& [name, cuts] : boxes) {
    const double mass = integrate_2d(true_log_density(name), cuts);
    EXPECT_GE(mass, 0.99) << name;
    EXPECT_LE(mass, 1.01) << name;
  }
}

TEST(LoadCsv, PlainNumbers) {
  TempFile f("1,2\n3.5,-4e-2\n+5,6E1\n");
  const auto r = load_csv(f.path());
  EXPECT_FALSE(r.had_header);
  ASSERT_EQ(r.dataset.rows.rows(), 3);
  ASSERT_EQ(r.dataset.rows.cols(), 2);
  EXPECT_EQ(r.dataset.rows(1, 1), -0.04);
  EXPECT_EQ(r.dataset.rows(2, 0), 5.0);
  EXPECT_EQ(r.dataset.rows(2, 1), 60.0);
}

TEST(LoadCsv, HeaderSkipped) {
  TempFile f("a,b\n1,2\n3,4\n");
  const auto r = load_csv(f.path());
  EXPECT_TRUE(r.had_header);
  EXPECT_EQ(r.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(r.dataset.rows.rows(), 2);
}

TEST(LoadCsv, NonFiniteRowsRejected) {
  TempFile f("x,y\n1,2\nNaN,3\n4,inf\n5,6\n");
  const auto r = load_csv(f.path());
  EXPECT_EQ(r.dataset.rows.rows(), 2);
  EXPECT_EQ(r.rejected_lines, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(r.dataset.rows(1, 0), 5.0);
}

TEST(LoadCsv, OtherDelimiter) {
  TempFile f("1;2\n3;4\n");
  EXPECT_EQ(load_csv(f.path(), ';').dataset.rows(1, 1), 4.0);
}

TEST(LoadCsv, Errors) {
  TempFile bad("1,2\n3,abc\n");
  try {
    load_csv(bad.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  TempFile ragged("1,2\n3\n");
  EXPECT_EQ(kind_of([&] { load_csv(ragged.path()); }), ErrorKind::kParse);
  TempFile empty("");
  EXPECT_EQ(kind_of([&] { load_csv(empty.path()); }), ErrorKind::kEmptyData);
  TempFile header_only("a,b\n");
  EXPECT_EQ(kind_of([&] { load_csv(header_only.path()); }), ErrorKind::kEmptyData);
  EXPECT_EQ(kind_of([] { load_csv("/nonexistent/x.csv"); }), ErrorKind::kIo);
}

TEST(WriteCsv, RoundTripsExactly) {
  const auto ds = gen("banana_cube", 50, 3);
  std::ostringstream out;
  write_csv(out, ds.rows, {"x1", "x2"});
  TempFile f(out.str());
  const auto r = load_csv(f.path());
  EXPECT_TRUE(r.had_header);
  EXPECT_TRUE((r.dataset.rows.array() == ds.rows.array()).all());
}

TEST(Split, CountsAndDeterminism) {
  const auto ds = gen("square", 1000, 1);
  const auto a = split(ds, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(a.train.rows.rows(), 800);
  EXPECT_EQ(a.val.rows.rows(), 100);
  EXPECT_EQ(a.test.rows.rows(), 100);
  const auto b = split(ds, {0.8, 0.1, 0.1}, 7);
  EXPECT_TRUE((a.train.rows.array() == b.train.rows.array()).all());
  EXPECT_TRUE((a.test.rows.array() == b.test.rows.array()).all());
  // Every row lands in exactly one part.
  EXPECT_NEAR(a.train.rows.sum() + a.val.rows.sum() + a.test.rows.sum(), ds.rows.sum(),
              1e-9);
}

TEST(Split, InvalidFractions) {
  const auto ds = gen("square", 100, 1);
  EXPECT_EQ(kind_of([&] { split(ds, {0.9, 0.2, 0.1}, 0); }), ErrorKind::kInvalidFractions);
  EXPECT_EQ(kind_of([&] { split(ds, {0.9, -0.1, 0.1}, 0); }), ErrorKind::kInvalidFractions);
}

}  // namespace
}  // namespace sosflow
