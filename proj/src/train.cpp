#include "sosflow/train.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sosflow/error.hpp"

namespace sosflow {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', 'O', 'S', 'F'};

// Sum over the chunk of -log p, with the gradient of (sum / total_rows)
// accumulated into grad.
double nll_chunk(const FlowModel& model, const Eigen::MatrixXd& rows,
                 double inv_total, Eigen::VectorXd& grad) {
  const int d = model.dim();
  const auto& st = model.standardizer();
  Eigen::MatrixXd xs = rows.transpose();
  xs.colwise() -= st.mean;
  xs.array().colwise() /= st.scale.array();

  BatchTape tape;
  Eigen::VectorXd logdet;
  const Eigen::MatrixXd z = model.forward_standardized(xs, logdet, &tape);

  const double log_norm = 0.5 * d * std::log(2.0 * std::numbers::pi);
  const double base = model.standardizer_logdet();
  double total = 0.0;
  for (Eigen::Index s = 0; s < z.cols(); ++s)
    total += 0.5 * z.col(s).squaredNorm() + log_norm - logdet(s) - base;

  const Eigen::MatrixXd grad_z = z * inv_total;
  const Eigen::VectorXd grad_logdet =
      Eigen::VectorXd::Constant(z.cols(), -inv_total);
  grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.num_params()));
  model.backward_standardized(tape, grad_z, grad_logdet,
                              std::span<double>(grad.data(), grad.size()));
  return total;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i]))
         << (8 * i);
  return v;
}

std::uint32_t crc_of(const std::string& bytes, size_t pos, size_t len) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0),
            reinterpret_cast<const Bytef*>(bytes.data() + pos),
            static_cast<uInt>(len)));
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::kInvalidConfig, msg);
  };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    fail("learning_rate must be > 0");
  if (epochs < 0) fail("epochs must be >= 0");
  if (blocks < 1) fail("blocks must be >= 1");
  if (k < 1) fail("k must be >= 1");
  if (r < 0 || r > 31) fail("r must be in [0, 31]");
  for (int h : hidden_sizes)
    if (h < 1) fail("hidden sizes must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    fail("val_fraction must be in [0, 1)");
  if (clip_gradients && !(clip_value > 0.0)) fail("clip_value must be > 0");
  if (shards < 1) fail("shards must be >= 1");
}

NllGrad nll_and_grad(const FlowModel& model, const Eigen::MatrixXd& batch,
                     int shards) {
  if (model.source() != SourceKind::kNormal)
    throw Error(ErrorKind::kUnsupported,
                "likelihood gradients require the normal source");
  if (batch.cols() != model.dim())
    throw Error(ErrorKind::kDimensionMismatch, "batch width != model dim");
  const Eigen::Index n = batch.rows();
  if (n < 1) throw Error(ErrorKind::kEmptyData, "empty batch");
  if (!batch.allFinite())
    throw Error(ErrorKind::kNonFinite, "batch contains non-finite values");

  const double inv_total = 1.0 / static_cast<double>(n);
  const int chunks = static_cast<int>(std::min<Eigen::Index>(shards, n));
  std::vector<double> sums(static_cast<size_t>(chunks), 0.0);
  std::vector<Eigen::VectorXd> grads(static_cast<size_t>(chunks));

  auto run = [&](int c) {
    const Eigen::Index lo = n * c / chunks;
    const Eigen::Index hi = n * (c + 1) / chunks;
    sums[static_cast<size_t>(c)] =
        nll_chunk(model, batch.middleRows(lo, hi - lo), inv_total,
                  grads[static_cast<size_t>(c)]);
  };
  if (chunks == 1) {
    run(0);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(chunks));
    for (int c = 0; c < chunks; ++c)
      workers.emplace_back([&, c] {
        try {
          run(c);
        } catch (...) {
          errors[static_cast<size_t>(c)] = std::current_exception();
        }
      });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  NllGrad out;
  out.tape.params = model.params();
  out.tape.grad = grads[0];
  double total = sums[0];
  for (int c = 1; c < chunks; ++c) {
    out.tape.grad += grads[static_cast<size_t>(c)];
    total += sums[static_cast<size_t>(c)];
  }
  out.nll = total * inv_total;
  if (!std::isfinite(out.nll) || !out.tape.grad.allFinite())
    throw Error(ErrorKind::kNonFinite, "loss or gradient is not finite");
  return out;
}

double mean_nll(const FlowModel& model, const Eigen::MatrixXd& rows) {
  if (rows.rows() < 1) throw Error(ErrorKind::kEmptyData, "no rows");
  constexpr Eigen::Index kChunk = 4096;
  double total = 0.0;
  for (Eigen::Index lo = 0; lo < rows.rows(); lo += kChunk) {
    const Eigen::Index len = std::min(kChunk, rows.rows() - lo);
    total -= model.log_prob_rows(rows.middleRows(lo, len)).sum();
  }
  return total / static_cast<double>(rows.rows());
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2,
           double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -=
      lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

Standardizer fit_standardizer(const Eigen::MatrixXd& rows) {
  Standardizer s;
  const double n = static_cast<double>(rows.rows());
  s.mean = rows.colwise().mean().transpose();
  s.scale.resize(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - s.mean(j)).square().sum() / n;
    s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

FitResult fit(const Eigen::MatrixXd& data, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  if (data.rows() < 2)
    throw Error(ErrorKind::kInvalidData, "need at least two rows");
  if (data.cols() < 1) throw Error(ErrorKind::kInvalidData, "no columns");
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    if (!data.row(i).allFinite())
      throw Error(ErrorKind::kInvalidData,
                  "row " + std::to_string(i) + " has non-finite values");

  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  Eigen::Index n_val = static_cast<Eigen::Index>(
      std::floor(config.val_fraction * static_cast<double>(data.rows())));
  if (config.val_fraction > 0.0) n_val = std::max<Eigen::Index>(n_val, 1);
  const Eigen::Index n_train = data.rows() - n_val;
  if (n_train < 1)
    throw Error(ErrorKind::kInvalidConfig, "validation split leaves no data");

  Eigen::MatrixXd train(n_train, data.cols());
  Eigen::MatrixXd val(n_val, data.cols());
  for (Eigen::Index i = 0; i < n_train; ++i)
    train.row(i) = data.row(order[static_cast<size_t>(i)]);
  for (Eigen::Index i = 0; i < n_val; ++i)
    val.row(i) = data.row(order[static_cast<size_t>(n_train + i)]);

  FlowSpec spec;
  spec.dim = static_cast<int>(data.cols());
  spec.blocks = config.blocks;
  spec.k = config.k;
  spec.r = config.r;
  spec.hidden_sizes = config.hidden_sizes;
  spec.alternate_orderings = config.alternate_orderings;
  spec.seed = config.seed;
  FitResult result{FlowModel::build(spec), {}, 0};
  FlowModel& model = result.model;
  model.set_standardizer(fit_standardizer(train));

  Eigen::VectorXd params = model.params();
  Adam adam(static_cast<size_t>(params.size()), config.learning_rate);
  Eigen::VectorXd best_params = params;
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<Eigen::Index> idx(static_cast<size_t>(n_train));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Eigen::MatrixXd batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double weighted = 0.0;
    for (Eigen::Index lo = 0; lo < n_train; lo += config.batch_size) {
      const Eigen::Index len =
          std::min<Eigen::Index>(config.batch_size, n_train - lo);
      batch.resize(len, data.cols());
      for (Eigen::Index i = 0; i < len; ++i)
        batch.row(i) = train.row(idx[static_cast<size_t>(lo + i)]);
      NllGrad step = nll_and_grad(model, batch, config.shards);
      weighted += step.nll * static_cast<double>(len);
      Eigen::VectorXd& grad = step.tape.grad;
      if (config.clip_gradients)
        grad = grad.cwiseMax(-config.clip_value).cwiseMin(config.clip_value);
      if (config.optimizer == OptimizerKind::kAdam)
        adam.step(params, grad);
      else
        params -= config.learning_rate * grad;
      model.set_params(std::span<const double>(params.data(), params.size()));
    }
    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_nll = weighted / static_cast<double>(n_train);
    metrics.val_nll = n_val > 0 ? mean_nll(model, val)
                                : std::numeric_limits<double>::quiet_NaN();
    if (n_val > 0 && metrics.val_nll < best_val) {
      best_val = metrics.val_nll;
      best_params = params;
      result.best_epoch = epoch;
    }
    result.history.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
  }
  if (n_val > 0 && result.best_epoch > 0) {
    model.set_params(
        std::span<const double>(best_params.data(), best_params.size()));
  } else {
    result.best_epoch = config.epochs;
  }
  return result;
}

std::string serialize(const FlowModel& model) {
  const auto& spec = model.spec();
  const Eigen::VectorXd params = model.params();

  std::string payload;
  payload.reserve(static_cast<size_t>(params.size()) * 8);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(params(i));
    for (int b = 0; b < 8; ++b)
      payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }

  json header;
  header["format"] = "sosflow-checkpoint";
  header["version"] = kCheckpointVersion;
  header["dim"] = spec.dim;
  header["blocks"] = model.num_blocks();
  header["k"] = spec.k;
  header["r"] = spec.r;
  header["hidden_sizes"] = spec.hidden_sizes;
  json orderings = json::array();
  for (const auto& block : model.blocks()) orderings.push_back(block.ordering);
  header["orderings"] = orderings;
  const auto& st = model.standardizer();
  header["standardizer"] = {
      {"mean", std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size())},
      {"scale",
       std::vector<double>(st.scale.data(), st.scale.data() + st.scale.size())}};
  header["source"] = to_string(spec.source);
  header["param_count"] = params.size();
  header["payload_crc32"] = crc_of(payload, 0, payload.size());

  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += payload;
  return out;
}

FlowModel deserialize(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, kMagic, 4) != 0)
    throw Error(ErrorKind::kIo, "not a sosflow checkpoint");
  const std::uint32_t header_len = get_u32(bytes, 4);
  if (bytes.size() < 8 + static_cast<size_t>(header_len))
    throw Error(ErrorKind::kIo, "truncated checkpoint header");

  json header;
  try {
    header = json::parse(bytes.substr(8, header_len));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("bad checkpoint header: ") + e.what());
  }
  try {
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw Error(ErrorKind::kFormatVersionMismatch,
                  "checkpoint version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));

    const size_t count = header.at("param_count").get<size_t>();
    const size_t start = 8 + static_cast<size_t>(header_len);
    if (bytes.size() != start + count * 8)
      throw Error(ErrorKind::kIo, "payload size does not match header");
    if (crc_of(bytes, start, count * 8) !=
        header.at("payload_crc32").get<std::uint32_t>())
      throw Error(ErrorKind::kChecksumMismatch, "payload CRC32 mismatch");

    FlowSpec spec;
    spec.dim = header.at("dim").get<int>();
    spec.blocks = header.at("blocks").get<int>();
    spec.k = header.at("k").get<int>();
    spec.r = header.at("r").get<int>();
    spec.hidden_sizes = header.at("hidden_sizes").get<std::vector<int>>();
    spec.source = source_from_string(header.at("source").get<std::string>());
    FlowModel model = FlowModel::build(spec);
    model.set_orderings(
        header.at("orderings").get<std::vector<std::vector<int>>>());

    const auto mean =
        header.at("standardizer").at("mean").get<std::vector<double>>();
    const auto scale =
        header.at("standardizer").at("scale").get<std::vector<double>>();
    Standardizer st;
    st.mean = Eigen::Map<const Eigen::VectorXd>(
        mean.data(), static_cast<Eigen::Index>(mean.size()));
    st.scale = Eigen::Map<const Eigen::VectorXd>(
        scale.data(), static_cast<Eigen::Index>(scale.size()));
    model.set_standardizer(st);

    std::vector<double> params(count);
    for (size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(
                    static_cast<unsigned char>(bytes[start + i * 8 + b]))
                << (8 * b);
      params[i] = std::bit_cast<double>(bits);
    }
    model.set_params(params);
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("bad checkpoint header: ") + e.what());
  }
}

void save(const FlowModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

FlowModel load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

}  // namespace sosflow
