#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sosflow/sospoly.hpp"

namespace sosflow {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MaskedLayer {
  RowMatrix weight;  // out x in; masked entries are held at exactly zero
  Eigen::VectorXd bias;
  RowMatrix mask;    // 0/1, same shape as weight
};

struct CondOutput {
  std::vector<SosCoeffs> coeffs;  // one per input position
};

// Masked autoregressive conditioner. Input position j (0-based) carries
// degree j+1; the out_per_dim() outputs describing dimension j carry degree
// j+1 as well, and the strict output mask makes them functions of inputs
// 0..j-1 only.
//
// Output block j is laid out as in sos::forward: k*(r+1) coefficients of a
// (row-major) followed by the offset c.
class MaskedNet {
 public:
  static MaskedNet build(int d, const std::vector<int>& hidden_sizes, int k,
                         int r, std::uint64_t seed);

  int dim() const { return d_; }
  int k() const { return k_; }
  int r() const { return r_; }
  int out_per_dim() const { return sos::block_size(k_, r_); }
  const std::vector<int>& hidden_sizes() const { return hidden_; }
  const std::vector<MaskedLayer>& layers() const { return layers_; }
  // degrees()[0] are the input degrees, degrees()[i] those of layer i's units.
  const std::vector<std::vector<int>>& degrees() const { return degrees_; }

  // False when every output weight is masked out (d == 1): the outputs are
  // then the output biases and the hidden layers are skipped.
  bool output_connected() const { return output_connected_; }

  CondOutput forward(std::span<const double> x) const;

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // [0] = input, then tanh outputs
  };

  // inputs: d x B, one column per sample. Returns (d * out_per_dim) x B.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs,
                                Cache* cache = nullptr) const;

  // Accumulates parameter gradients into `grad` (layout of params()) and
  // returns the gradient with respect to the inputs.
  Eigen::MatrixXd backward_batch(const Cache& cache,
                                 const Eigen::MatrixXd& grad_out,
                                 std::span<double> grad) const;

  std::size_t num_params() const;
  // Per layer: weight (row-major, masked entries included), then bias.
  void get_params(std::span<double> out) const;
  // Masked entries are forced to zero.
  void set_params(std::span<const double> in);

 private:
  int d_ = 0;
  int k_ = 1;
  int r_ = 0;
  std::vector<int> hidden_;
  std::vector<MaskedLayer> layers_;
  std::vector<std::vector<int>> degrees_;
  bool output_connected_ = true;
};

}  // namespace sosflow
