#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sosflow/conditioner.hpp"

namespace sosflow {

enum class SourceKind { kNormal, kUniform };

std::string to_string(SourceKind kind);
SourceKind source_from_string(const std::string& name);

struct FlowBlock {
  MaskedNet net;
  // Position i of the block works on coordinate ordering[i]; outputs are
  // written back to the same coordinate, so every block maps natural
  // coordinates to natural coordinates.
  std::vector<int> ordering;
};

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

struct FlowSpec {
  int dim = 1;
  int blocks = 1;
  int k = 5;
  int r = 4;
  std::vector<int> hidden_sizes{100, 100};
  bool alternate_orderings = true;
  SourceKind source = SourceKind::kNormal;
  std::uint64_t seed = 0;
};

struct Normalized {
  Eigen::VectorXd z;
  double logdet = 0.0;
};

// Per-block intermediates of a batched forward pass, kept for backprop.
struct BlockTape {
  Eigen::MatrixXd input;   // permuted block input, d x B
  Eigen::MatrixXd output;  // conditioner output, (d * per_dim) x B
  MaskedNet::Cache net_cache;
  std::vector<sos::PointValue> points;  // d * B, index j * B + s
};

struct BatchTape {
  std::vector<BlockTape> blocks;
};

// Stack of SOS blocks in the normalizing direction x -> z. The generative
// map z -> x is its inverse and is only ever evaluated by root finding.
class FlowModel {
 public:
  static FlowModel build(const FlowSpec& spec);

  int dim() const { return spec_.dim; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const FlowSpec& spec() const { return spec_; }
  SourceKind source() const { return spec_.source; }
  const std::vector<FlowBlock>& blocks() const { return blocks_; }
  std::vector<FlowBlock>& blocks() { return blocks_; }
  const Standardizer& standardizer() const { return standardizer_; }
  void set_standardizer(Standardizer s);
  void set_orderings(const std::vector<std::vector<int>>& orderings);

  Normalized normalize(std::span<const double> x) const;
  double log_prob(std::span<const double> x) const;
  // Row-wise log_prob over an n x d matrix.
  Eigen::VectorXd log_prob_rows(const Eigen::MatrixXd& rows) const;

  // Generative map: inverts the stack block by block in reverse, one
  // coordinate at a time within each block.
  Eigen::VectorXd inverse(std::span<const double> z, double tol = 1e-12) const;
  Eigen::MatrixXd inverse_rows(const Eigen::MatrixXd& z_rows,
                               double tol = 1e-12) const;
  Eigen::MatrixXd sample(int n, std::uint64_t seed) const;

  // Batched normalizing pass on standardized inputs (d x B). Returns z and
  // fills logdet (blocks only, without the standardizer constant).
  Eigen::MatrixXd forward_standardized(const Eigen::MatrixXd& xs,
                                       Eigen::VectorXd& logdet,
                                       BatchTape* tape = nullptr) const;
  // Backprop of  sum_s <grad_z[:, s], z_s> + grad_logdet[s] * logdet_s.
  void backward_standardized(const BatchTape& tape,
                             const Eigen::MatrixXd& grad_z,
                             const Eigen::VectorXd& grad_logdet,
                             std::span<double> grad) const;

  double standardizer_logdet() const;

  std::size_t num_params() const;
  Eigen::VectorXd params() const;
  void set_params(std::span<const double> values);

 private:
  FlowSpec spec_;
  std::vector<FlowBlock> blocks_;
  Standardizer standardizer_;
};

// Raw source draws (n x d) used by FlowModel::sample for the same seed.
Eigen::MatrixXd draw_source(SourceKind kind, int n, int d, std::uint64_t seed);

// Log-density of the source at z. Uniform sources throw DomainError outside
// the unit cube.
double source_log_density(SourceKind kind, std::span<const double> z);

// Per-conditional effective coefficient counts: L*k*(r+1) for a stacked
// flow and k*((2r+1)^L - 1)/2 for the single wide block reaching the same
// degree. Throws Overflow when the latter does not fit in 64 bits.
std::pair<std::int64_t, std::int64_t> param_count(int blocks, int k, int r);

}  // namespace sosflow
