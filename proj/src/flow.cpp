#include "sosflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "sosflow/error.hpp"

namespace sosflow {

namespace {

void check_permutation(const std::vector<int>& ordering, int d) {
  if (static_cast<int>(ordering.size()) != d)
    throw Error(ErrorKind::kInvalidConfig, "ordering length != dimension");
  std::vector<bool> seen(static_cast<size_t>(d), false);
  for (int v : ordering) {
    if (v < 0 || v >= d || seen[static_cast<size_t>(v)])
      throw Error(ErrorKind::kInvalidConfig, "ordering is not a permutation");
    seen[static_cast<size_t>(v)] = true;
  }
}

std::span<const double> column_block(const Eigen::MatrixXd& m, Eigen::Index col,
                                     int j, int per_dim) {
  return {m.data() + col * m.rows() + j * per_dim,
          static_cast<size_t>(per_dim)};
}

}  // namespace

std::string to_string(SourceKind kind) {
  return kind == SourceKind::kNormal ? "normal" : "uniform";
}

SourceKind source_from_string(const std::string& name) {
  if (name == "normal") return SourceKind::kNormal;
  if (name == "uniform") return SourceKind::kUniform;
  throw Error(ErrorKind::kInvalidConfig, "unknown source '" + name + "'");
}

FlowModel FlowModel::build(const FlowSpec& spec) {
  if (spec.dim < 1) throw Error(ErrorKind::kInvalidConfig, "dim must be >= 1");
  if (spec.blocks < 1)
    throw Error(ErrorKind::kInvalidConfig, "need at least one block");
  FlowModel model;
  model.spec_ = spec;
  std::mt19937_64 seeder(spec.seed);
  std::vector<int> ordering(static_cast<size_t>(spec.dim));
  for (int i = 0; i < spec.dim; ++i) ordering[static_cast<size_t>(i)] = i;
  for (int b = 0; b < spec.blocks; ++b) {
    if (b > 0 && spec.alternate_orderings)
      std::reverse(ordering.begin(), ordering.end());
    model.blocks_.push_back(
        {MaskedNet::build(spec.dim, spec.hidden_sizes, spec.k, spec.r,
                          seeder()),
         ordering});
  }
  model.standardizer_.mean = Eigen::VectorXd::Zero(spec.dim);
  model.standardizer_.scale = Eigen::VectorXd::Ones(spec.dim);
  return model;
}

void FlowModel::set_standardizer(Standardizer s) {
  if (s.mean.size() != dim() || s.scale.size() != dim())
    throw Error(ErrorKind::kDimensionMismatch, "standardizer size");
  if (!(s.scale.array() > 0.0).all() || !s.mean.allFinite() ||
      !s.scale.allFinite())
    throw Error(ErrorKind::kInvalidData,
                "standardizer scales must be finite and positive");
  standardizer_ = std::move(s);
}

void FlowModel::set_orderings(const std::vector<std::vector<int>>& orderings) {
  if (orderings.size() != blocks_.size())
    throw Error(ErrorKind::kInvalidConfig, "one ordering per block required");
  for (size_t b = 0; b < blocks_.size(); ++b) {
    check_permutation(orderings[b], dim());
    blocks_[b].ordering = orderings[b];
  }
}

double FlowModel::standardizer_logdet() const {
  return -standardizer_.scale.array().log().sum();
}

Eigen::MatrixXd FlowModel::forward_standardized(const Eigen::MatrixXd& xs,
                                                Eigen::VectorXd& logdet,
                                                BatchTape* tape) const {
  const int d = dim();
  const Eigen::Index batch = xs.cols();
  const int k = spec_.k;
  const int r = spec_.r;
  const int per_dim = sos::block_size(k, r);
  if (xs.rows() != d)
    throw Error(ErrorKind::kDimensionMismatch, "input rows != model dim");

  logdet = Eigen::VectorXd::Zero(batch);
  if (tape) tape->blocks.assign(blocks_.size(), BlockTape{});
  Eigen::MatrixXd v = xs;
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const auto& block = blocks_[b];
    Eigen::MatrixXd u(d, batch);
    for (int i = 0; i < d; ++i)
      u.row(i) = v.row(block.ordering[static_cast<size_t>(i)]);
    BlockTape* bt = tape ? &tape->blocks[b] : nullptr;
    Eigen::MatrixXd out =
        block.net.forward_batch(u, bt ? &bt->net_cache : nullptr);
    if (bt) bt->points.resize(static_cast<size_t>(d * batch));
    for (int j = 0; j < d; ++j) {
      const int target = block.ordering[static_cast<size_t>(j)];
      for (Eigen::Index s = 0; s < batch; ++s) {
        const auto pv =
            sos::forward(column_block(out, s, j, per_dim), k, r, u(j, s));
        v(target, s) = pv.z;
        logdet(s) += pv.log_deriv;
        if (bt) bt->points[static_cast<size_t>(j * batch + s)] = pv;
      }
    }
    if (!v.allFinite() || !logdet.allFinite())
      throw Error(ErrorKind::kNonFinite,
                  "non-finite value after block " + std::to_string(b));
    if (bt) {
      bt->input = std::move(u);
      bt->output = std::move(out);
    }
  }
  return v;
}

void FlowModel::backward_standardized(const BatchTape& tape,
                                      const Eigen::MatrixXd& grad_z,
                                      const Eigen::VectorXd& grad_logdet,
                                      std::span<double> grad) const {
  const int d = dim();
  const int k = spec_.k;
  const int r = spec_.r;
  const int per_dim = sos::block_size(k, r);
  const Eigen::Index batch = grad_z.cols();
  if (grad.size() != num_params())
    throw Error(ErrorKind::kDimensionMismatch, "gradient span size");

  std::vector<size_t> offsets;
  size_t offset = 0;
  for (const auto& block : blocks_) {
    offsets.push_back(offset);
    offset += block.net.num_params();
  }

  Eigen::MatrixXd gv = grad_z;
  for (size_t b = blocks_.size(); b-- > 0;) {
    const auto& block = blocks_[b];
    const auto& bt = tape.blocks[b];
    Eigen::MatrixXd gu = Eigen::MatrixXd::Zero(d, batch);
    Eigen::MatrixXd gout = Eigen::MatrixXd::Zero(bt.output.rows(), batch);
    for (int j = 0; j < d; ++j) {
      const int target = block.ordering[static_cast<size_t>(j)];
      for (Eigen::Index s = 0; s < batch; ++s) {
        std::span<double> gblock(gout.data() + s * gout.rows() + j * per_dim,
                                 static_cast<size_t>(per_dim));
        gu(j, s) += sos::backward(column_block(bt.output, s, j, per_dim), k, r,
                                  bt.input(j, s),
                                  bt.points[static_cast<size_t>(j * batch + s)],
                                  gv(target, s), grad_logdet(s), gblock);
      }
    }
    gu += block.net.backward_batch(
        bt.net_cache, gout, grad.subspan(offsets[b], block.net.num_params()));
    for (int i = 0; i < d; ++i)
      gv.row(block.ordering[static_cast<size_t>(i)]) = gu.row(i);
  }
}

Normalized FlowModel::normalize(std::span<const double> x) const {
  const int d = dim();
  if (static_cast<int>(x.size()) != d)
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(d) + " values, got " +
                    std::to_string(x.size()));
  Eigen::MatrixXd xs(d, 1);
  for (int i = 0; i < d; ++i) {
    const double xi = x[static_cast<size_t>(i)];
    if (!std::isfinite(xi))
      throw Error(ErrorKind::kNonFinite, "input is not finite");
    xs(i, 0) = (xi - standardizer_.mean(i)) / standardizer_.scale(i);
  }
  Eigen::VectorXd logdet;
  const Eigen::MatrixXd z = forward_standardized(xs, logdet);
  return {z.col(0), logdet(0) + standardizer_logdet()};
}

double FlowModel::log_prob(std::span<const double> x) const {
  const auto n = normalize(x);
  return source_log_density(
             spec_.source,
             std::span<const double>(n.z.data(), static_cast<size_t>(n.z.size()))) +
         n.logdet;
}

Eigen::VectorXd FlowModel::log_prob_rows(const Eigen::MatrixXd& rows) const {
  const int d = dim();
  if (rows.cols() != d)
    throw Error(ErrorKind::kDimensionMismatch,
                "data has " + std::to_string(rows.cols()) +
                    " columns, model expects " + std::to_string(d));
  if (!rows.allFinite())
    throw Error(ErrorKind::kNonFinite, "input contains non-finite values");
  Eigen::MatrixXd xs = rows.transpose();
  xs.colwise() -= standardizer_.mean;
  xs.array().colwise() /= standardizer_.scale.array();
  Eigen::VectorXd logdet;
  const Eigen::MatrixXd z = forward_standardized(xs, logdet);
  Eigen::VectorXd out(rows.rows());
  const double base = standardizer_logdet();
  for (Eigen::Index s = 0; s < rows.rows(); ++s)
    out(s) = source_log_density(
                 spec_.source,
                 std::span<const double>(z.data() + s * d,
                                         static_cast<size_t>(d))) +
             logdet(s) + base;
  return out;
}

Eigen::MatrixXd FlowModel::inverse_rows(const Eigen::MatrixXd& z_rows,
                                        double tol) const {
  const int d = dim();
  if (z_rows.cols() != d)
    throw Error(ErrorKind::kDimensionMismatch, "source rows have wrong width");
  const Eigen::Index n = z_rows.rows();
  const int k = spec_.k;
  const int r = spec_.r;
  const int per_dim = sos::block_size(k, r);

  Eigen::MatrixXd w = z_rows.transpose();  // d x n, natural coordinates
  for (size_t b = blocks_.size(); b-- > 0;) {
    const auto& block = blocks_[b];
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(d, n);
    for (int j = 0; j < d; ++j) {
      // Coefficients for position j only see positions < j, already solved.
      const Eigen::MatrixXd out = block.net.forward_batch(u);
      const int target = block.ordering[static_cast<size_t>(j)];
      for (Eigen::Index s = 0; s < n; ++s) {
        const SosCoeffs coeffs =
            sos::unpack(column_block(out, s, j, per_dim), k, r);
        u(j, s) = invert(coeffs, expand(coeffs), w(target, s), tol);
      }
    }
    for (int i = 0; i < d; ++i)
      w.row(block.ordering[static_cast<size_t>(i)]) = u.row(i);
  }
  w.array().colwise() *= standardizer_.scale.array();
  w.colwise() += standardizer_.mean;
  return w.transpose();
}

Eigen::VectorXd FlowModel::inverse(std::span<const double> z,
                                   double tol) const {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(z.size()));
  for (size_t i = 0; i < z.size(); ++i)
    row(0, static_cast<Eigen::Index>(i)) = z[i];
  return inverse_rows(row, tol).row(0).transpose();
}

Eigen::MatrixXd FlowModel::sample(int n, std::uint64_t seed) const {
  if (n < 1) throw Error(ErrorKind::kInvalidConfig, "sample count must be >= 1");
  return inverse_rows(draw_source(spec_.source, n, dim(), seed));
}

std::size_t FlowModel::num_params() const {
  std::size_t n = 0;
  for (const auto& block : blocks_) n += block.net.num_params();
  return n;
}

Eigen::VectorXd FlowModel::params() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_params()));
  size_t offset = 0;
  for (const auto& block : blocks_) {
    const size_t n = block.net.num_params();
    block.net.get_params(std::span<double>(out.data() + offset, n));
    offset += n;
  }
  return out;
}

void FlowModel::set_params(std::span<const double> values) {
  if (values.size() != num_params())
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(num_params()) + " parameters");
  size_t offset = 0;
  for (auto& block : blocks_) {
    const size_t n = block.net.num_params();
    block.net.set_params(values.subspan(offset, n));
    offset += n;
  }
}

Eigen::MatrixXd draw_source(SourceKind kind, int n, int d,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out(n, d);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < d; ++j)
      out(s, j) = kind == SourceKind::kNormal ? normal(rng) : uniform(rng);
  return out;
}

double source_log_density(SourceKind kind, std::span<const double> z) {
  if (kind == SourceKind::kNormal) {
    double sq = 0.0;
    for (double v : z) sq += v * v;
    return -0.5 * sq -
           0.5 * static_cast<double>(z.size()) *
               std::log(2.0 * std::numbers::pi);
  }
  for (double v : z)
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorKind::kDomain, "point leaves the unit cube");
  return 0.0;
}

std::pair<std::int64_t, std::int64_t> param_count(int blocks, int k, int r) {
  if (blocks < 1 || k < 1 || r < 0)
    throw Error(ErrorKind::kInvalidConfig, "need L >= 1, k >= 1, r >= 0");
  std::int64_t stacked = 0;
  if (__builtin_mul_overflow(static_cast<std::int64_t>(blocks),
                             static_cast<std::int64_t>(k), &stacked) ||
      __builtin_mul_overflow(stacked, static_cast<std::int64_t>(r) + 1,
                             &stacked))
    throw Error(ErrorKind::kOverflow, "stacked parameter count overflows");

  std::int64_t power = 1;
  const std::int64_t base = 2 * static_cast<std::int64_t>(r) + 1;
  for (int i = 0; i < blocks; ++i)
    if (__builtin_mul_overflow(power, base, &power))
      throw Error(ErrorKind::kOverflow, "(2r+1)^L overflows 64 bits");
  std::int64_t wide = 0;
  // (2r+1)^L - 1 is even, so halving first is exact.
  if (__builtin_mul_overflow((power - 1) / 2, static_cast<std::int64_t>(k),
                             &wide))
    throw Error(ErrorKind::kOverflow, "wide parameter count overflows");
  return {stacked, wide};
}

}  // namespace sosflow
