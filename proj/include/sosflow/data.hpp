#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sosflow {

using LogDensityFn = std::function<double(std::span<const double>)>;

struct Dataset {
  std::string name;
  Eigen::MatrixXd rows;      // n x d
  LogDensityFn true_logpdf;  // empty for loaded data
};

// gmm3, gmm5, banana_sq, banana_cube, funnel, square, mog_grid, rings.
const std::vector<std::string>& dataset_names();

Dataset gen(const std::string& name, int n, std::uint64_t seed);

// Exact log-density of a named synthetic set without drawing samples.
LogDensityFn true_log_density(const std::string& name);

int dataset_dim(const std::string& name);

struct CsvLoad {
  Dataset dataset;
  bool had_header = false;
  std::vector<std::string> header;
  std::vector<std::size_t> rejected_lines;  // 1-based lines with NaN/Inf cells
};

// Rectangular numeric CSV, optional header (detected when the first row does
// not parse as numbers). Rows containing a non-finite value are dropped and
// reported; any other unparsable cell is a ParseError with its position.
CsvLoad load_csv(const std::filesystem::path& path, char delimiter = ',');

void write_csv(std::ostream& out, const Eigen::MatrixXd& rows,
               const std::vector<std::string>& header = {});
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& rows,
               const std::vector<std::string>& header = {});

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Seeded shuffle followed by a contiguous train/val/test split.
Splits split(const Dataset& ds, std::array<double, 3> fractions,
             std::uint64_t seed);

}  // namespace sosflow
