#include "sosflow/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "sosflow/error.hpp"
#include "sosflow/oracle.hpp"

namespace sosflow {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// log N(x; mean, var)
double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double log_sum_exp(std::span<const double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

constexpr double kGridCenter = 2.0;
constexpr double kGridSd = 0.4;
constexpr double kRingRadii[2] = {1.0, 3.0};
constexpr double kRingSd = 0.1;

double ring_radial_mass() {
  double z = 0.0;
  for (double radius : kRingRadii)
    z += 0.5 * 0.5 * std::erfc(-radius / (kRingSd * std::numbers::sqrt2));
  return z;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delimiter)) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

const std::vector<std::string>& dataset_names() {
  static const std::vector<std::string> names = {
      "gmm3", "gmm5", "banana_sq", "banana_cube",
      "funnel", "square", "mog_grid", "rings"};
  return names;
}

int dataset_dim(const std::string& name) {
  if (name == "gmm3" || name == "gmm5") return 1;
  const auto& names = dataset_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw Error(ErrorKind::kUnknownDataset, "unknown dataset '" + name + "'");
  return 2;
}

LogDensityFn true_log_density(const std::string& name) {
  if (name == "gmm3" || name == "gmm5") {
    const GmmSpec spec = name == "gmm3" ? GmmSpec::three_component()
                                        : GmmSpec::five_component();
    return [spec](std::span<const double> x) { return spec.log_pdf(x[0]); };
  }
  if (name == "banana_sq")
    return [](std::span<const double> x) {
      return log_normal(x[1], 0.0, 4.0) +
             log_normal(x[0], 0.25 * x[1] * x[1], 1.0);
    };
  if (name == "banana_cube")
    return [](std::span<const double> x) {
      return log_normal(x[1], 2.0, 2.0) +
             log_normal(x[0], x[1] * x[1] * x[1] / 3.0, 1.5);
    };
  if (name == "funnel")
    return [](std::span<const double> x) {
      return log_normal(x[0], 0.0, 1.0) + log_normal(x[1], 0.0, std::exp(x[0]));
    };
  if (name == "square")
    return [](std::span<const double> x) {
      const bool inside = std::abs(x[0]) <= 2.0 && std::abs(x[1]) <= 2.0;
      return inside ? -std::log(16.0) : -std::numeric_limits<double>::infinity();
    };
  if (name == "mog_grid")
    return [](std::span<const double> x) {
      const double var = kGridSd * kGridSd;
      double terms[4];
      int i = 0;
      for (double cx : {-kGridCenter, kGridCenter})
        for (double cy : {-kGridCenter, kGridCenter})
          terms[i++] = std::log(0.25) + log_normal(x[0], cx, var) +
                       log_normal(x[1], cy, var);
      return log_sum_exp(terms);
    };
  if (name == "rings") {
    const double log_mass = std::log(ring_radial_mass());
    return [log_mass](std::span<const double> x) {
      const double radius = std::hypot(x[0], x[1]);
      if (radius == 0.0) return -std::numeric_limits<double>::infinity();
      double terms[2];
      for (int i = 0; i < 2; ++i)
        terms[i] = std::log(0.5) +
                   log_normal(radius, kRingRadii[i], kRingSd * kRingSd);
      return log_sum_exp(terms) - log_mass -
             std::log(2.0 * std::numbers::pi * radius);
    };
  }
  throw Error(ErrorKind::kUnknownDataset, "unknown dataset '" + name + "'");
}

Dataset gen(const std::string& name, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::kInvalidConfig, "n must be >= 1");
  const int d = dataset_dim(name);
  Dataset ds;
  ds.name = name;
  ds.rows.resize(n, d);
  ds.true_logpdf = true_log_density(name);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  if (d == 1) {
    const GmmSpec spec = name == "gmm3" ? GmmSpec::three_component()
                                        : GmmSpec::five_component();
    std::discrete_distribution<int> pick(spec.weights.begin(),
                                         spec.weights.end());
    for (int s = 0; s < n; ++s) {
      const auto c = static_cast<size_t>(pick(rng));
      ds.rows(s, 0) = spec.means[c] + spec.sds[c] * normal(rng);
    }
    return ds;
  }

  for (int s = 0; s < n; ++s) {
    double x1 = 0.0, x2 = 0.0;
    if (name == "banana_sq") {
      x2 = 2.0 * normal(rng);
      x1 = 0.25 * x2 * x2 + normal(rng);
    } else if (name == "banana_cube") {
      x2 = 2.0 + std::sqrt(2.0) * normal(rng);
      x1 = x2 * x2 * x2 / 3.0 + std::sqrt(1.5) * normal(rng);
    } else if (name == "funnel") {
      x1 = normal(rng);
      x2 = std::exp(0.5 * x1) * normal(rng);
    } else if (name == "square") {
      x1 = -2.0 + 4.0 * uniform(rng);
      x2 = -2.0 + 4.0 * uniform(rng);
    } else if (name == "mog_grid") {
      const double u = uniform(rng);
      const double cx = u < 0.5 ? -kGridCenter : kGridCenter;
      const double cy = (u < 0.25 || (u >= 0.5 && u < 0.75)) ? -kGridCenter
                                                             : kGridCenter;
      x1 = cx + kGridSd * normal(rng);
      x2 = cy + kGridSd * normal(rng);
    } else {  // rings
      const double radius_center = kRingRadii[uniform(rng) < 0.5 ? 0 : 1];
      double radius;
      do {
        radius = radius_center + kRingSd * normal(rng);
      } while (radius <= 0.0);
      const double angle = 2.0 * std::numbers::pi * uniform(rng);
      x1 = radius * std::cos(angle);
      x2 = radius * std::sin(angle);
    }
    ds.rows(s, 0) = x1;
    ds.rows(s, 1) = x2;
  }
  return ds;
}

CsvLoad load_csv(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());

  CsvLoad result;
  result.dataset.name = path.stem().string();
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t line_no = 0;
  size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, delimiter);
    std::vector<double> values(cells.size());
    size_t bad_col = 0;
    bool ok = true;
    for (size_t c = 0; c < cells.size(); ++c)
      if (!parse_double(cells[c], values[c])) {
        ok = false;
        bad_col = c + 1;
        break;
      }
    if (first) {
      first = false;
      width = cells.size();
      if (!ok) {
        result.had_header = true;
        result.header = cells;
        continue;
      }
    }
    if (cells.size() != width)
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " columns, found " +
                      std::to_string(cells.size()));
    if (!ok)
      throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) +
                                         ", column " + std::to_string(bad_col) +
                                         ": not a number");
    if (!std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); })) {
      result.rejected_lines.push_back(line_no);
      continue;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty())
    throw Error(ErrorKind::kEmptyData, "no usable rows in " + path.string());

  auto& m = result.dataset.rows;
  m.resize(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(width));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return result;
}

void write_csv(std::ostream& out, const Eigen::MatrixXd& rows,
               const std::vector<std::string>& header) {
  const auto old = out.precision(17);
  for (size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  if (!header.empty()) out << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      out << (j ? "," : "") << rows(i, j);
    out << '\n';
  }
  out.precision(old);
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& rows,
               const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_csv(out, rows, header);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

Splits split(const Dataset& ds, std::array<double, 3> fractions,
             std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f))
      throw Error(ErrorKind::kInvalidFractions, "fractions must be positive");
    total += f;
  }
  if (total > 1.0 + 1e-12)
    throw Error(ErrorKind::kInvalidFractions, "fractions sum to more than 1");

  const Eigen::Index n = ds.rows.rows();
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Splits out;
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  const char* suffix[3] = {"/train", "/val", "/test"};
  Eigen::Index start = 0;
  for (int p = 0; p < 3; ++p) {
    const auto count = static_cast<Eigen::Index>(
        std::floor(fractions[static_cast<size_t>(p)] * static_cast<double>(n) +
                   1e-9));
    Dataset& part = *parts[p];
    part.name = ds.name + suffix[p];
    part.true_logpdf = ds.true_logpdf;
    part.rows.resize(count, ds.rows.cols());
    for (Eigen::Index i = 0; i < count; ++i)
      part.rows.row(i) = ds.rows.row(order[static_cast<size_t>(start + i)]);
    start += count;
  }
  return out;
}

}  // namespace sosflow
