#include "sosflow/conditioner.hpp"

#include <cmath>
#include <random>

#include "sosflow/error.hpp"

namespace sosflow {

MaskedNet MaskedNet::build(int d, const std::vector<int>& hidden_sizes, int k,
                           int r, std::uint64_t seed) {
  if (d < 1) throw Error(ErrorKind::kInvalidConfig, "dimension must be >= 1");
  if (k < 1 || r < 0)
    throw Error(ErrorKind::kInvalidConfig, "need k >= 1 and r >= 0");
  for (int h : hidden_sizes)
    if (h < 1)
      throw Error(ErrorKind::kInvalidConfig, "hidden sizes must be >= 1");

  MaskedNet net;
  net.d_ = d;
  net.k_ = k;
  net.r_ = r;
  net.hidden_ = hidden_sizes;
  const int per_dim = net.out_per_dim();

  std::vector<int> input_degrees(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) input_degrees[static_cast<size_t>(i)] = i + 1;
  net.degrees_.push_back(input_degrees);

  for (int h : hidden_sizes) {
    std::vector<int> deg(static_cast<size_t>(h));
    for (int u = 0; u < h; ++u)
      deg[static_cast<size_t>(u)] = d == 1 ? 1 : (u % (d - 1)) + 1;
    net.degrees_.push_back(std::move(deg));
  }
  std::vector<int> out_degrees(static_cast<size_t>(d * per_dim));
  for (int o = 0; o < d * per_dim; ++o)
    out_degrees[static_cast<size_t>(o)] = o / per_dim + 1;
  net.degrees_.push_back(out_degrees);

  std::mt19937_64 rng(seed);
  const size_t n_layers = net.degrees_.size() - 1;
  net.output_connected_ = false;
  for (size_t li = 0; li < n_layers; ++li) {
    const auto& din = net.degrees_[li];
    const auto& dout = net.degrees_[li + 1];
    const bool is_output = li + 1 == n_layers;
    MaskedLayer layer;
    const auto rows = static_cast<Eigen::Index>(dout.size());
    const auto cols = static_cast<Eigen::Index>(din.size());
    layer.mask.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        const int a = dout[static_cast<size_t>(i)];
        const int b = din[static_cast<size_t>(j)];
        layer.mask(i, j) = (is_output ? a > b : a >= b) ? 1.0 : 0.0;
      }
    layer.weight = RowMatrix::Zero(rows, cols);
    layer.bias = Eigen::VectorXd::Zero(rows);
    if (is_output) {
      net.output_connected_ = (layer.mask.array() != 0.0).any();
      // Identity start: a(kappa, 0) = 1/sqrt(k), everything else zero.
      for (int j = 0; j < d; ++j)
        for (int kappa = 0; kappa < k; ++kappa)
          layer.bias(j * per_dim + kappa * (r + 1)) =
              1.0 / std::sqrt(static_cast<double>(k));
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
      std::uniform_real_distribution<double> unif(-bound, bound);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
          const double w = unif(rng);
          layer.weight(i, j) = layer.mask(i, j) != 0.0 ? w : 0.0;
        }
    }
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

CondOutput MaskedNet::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != d_)
    throw Error(ErrorKind::kDimensionMismatch,
                "conditioner expects " + std::to_string(d_) + " inputs, got " +
                    std::to_string(x.size()));
  Eigen::MatrixXd in(d_, 1);
  for (int i = 0; i < d_; ++i) in(i, 0) = x[static_cast<size_t>(i)];
  const Eigen::MatrixXd out = forward_batch(in);
  CondOutput result;
  const int per_dim = out_per_dim();
  for (int j = 0; j < d_; ++j)
    result.coeffs.push_back(sos::unpack(
        std::span<const double>(out.data() + j * per_dim,
                                static_cast<size_t>(per_dim)),
        k_, r_));
  return result;
}

Eigen::MatrixXd MaskedNet::forward_batch(const Eigen::MatrixXd& inputs,
                                         Cache* cache) const {
  if (inputs.rows() != d_)
    throw Error(ErrorKind::kDimensionMismatch, "conditioner input rows != d");
  const auto& out_layer = layers_.back();
  if (!output_connected_) {
    if (cache) cache->activations.assign(1, inputs);
    return out_layer.bias.replicate(1, inputs.cols());
  }
  Eigen::MatrixXd h = inputs;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(h);
  }
  for (size_t li = 0; li + 1 < layers_.size(); ++li) {
    const auto& layer = layers_[li];
    Eigen::MatrixXd pre = layer.weight * h;
    pre.colwise() += layer.bias;
    h = pre.array().tanh().matrix();
    if (cache) cache->activations.push_back(h);
  }
  Eigen::MatrixXd out = out_layer.weight * h;
  out.colwise() += out_layer.bias;
  return out;
}

Eigen::MatrixXd MaskedNet::backward_batch(const Cache& cache,
                                          const Eigen::MatrixXd& grad_out,
                                          std::span<double> grad) const {
  // Offsets of each layer inside the flat parameter vector.
  std::vector<size_t> offsets;
  size_t offset = 0;
  for (const auto& layer : layers_) {
    offsets.push_back(offset);
    offset += static_cast<size_t>(layer.weight.size() + layer.bias.size());
  }

  const size_t last = layers_.size() - 1;
  const auto& out_layer = layers_[last];
  const Eigen::Index batch = grad_out.cols();
  {
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[last] +
                                       out_layer.weight.size(),
                                   out_layer.bias.size());
    gb += grad_out.rowwise().sum();
  }
  if (!output_connected_) return Eigen::MatrixXd::Zero(d_, batch);

  Eigen::MatrixXd delta = grad_out;
  for (size_t li = last + 1; li-- > 0;) {
    const auto& layer = layers_[li];
    const Eigen::MatrixXd& input = cache.activations[li];
    Eigen::Map<RowMatrix> gw(grad.data() + offsets[li], layer.weight.rows(),
                             layer.weight.cols());
    gw += (delta * input.transpose()).cwiseProduct(layer.mask);
    if (li != last) {
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[li] +
                                         layer.weight.size(),
                                     layer.bias.size());
      gb += delta.rowwise().sum();
    }
    Eigen::MatrixXd back = layer.weight.transpose() * delta;
    if (li == 0) return back;
    // tanh' = 1 - h^2
    delta = back.array() * (1.0 - input.array().square());
  }
  return Eigen::MatrixXd::Zero(d_, batch);
}

std::size_t MaskedNet::num_params() const {
  std::size_t n = 0;
  for (const auto& layer : layers_)
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

void MaskedNet::get_params(std::span<double> out) const {
  if (out.size() != num_params())
    throw Error(ErrorKind::kDimensionMismatch, "parameter span size");
  double* p = out.data();
  for (const auto& layer : layers_) {
    std::copy(layer.weight.data(), layer.weight.data() + layer.weight.size(),
              p);
    p += layer.weight.size();
    std::copy(layer.bias.data(), layer.bias.data() + layer.bias.size(), p);
    p += layer.bias.size();
  }
}

void MaskedNet::set_params(std::span<const double> in) {
  if (in.size() != num_params())
    throw Error(ErrorKind::kDimensionMismatch, "parameter span size");
  const double* p = in.data();
  for (auto& layer : layers_) {
    std::copy(p, p + layer.weight.size(), layer.weight.data());
    layer.weight = layer.weight.cwiseProduct(layer.mask);
    p += layer.weight.size();
    std::copy(p, p + layer.bias.size(), layer.bias.data());
    p += layer.bias.size();
  }
}

}  // namespace sosflow
