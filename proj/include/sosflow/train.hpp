#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sosflow/flow.hpp"

namespace sosflow {

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  int batch_size = 1000;
  double learning_rate = 1e-3;
  int epochs = 40;
  int blocks = 8;
  int k = 5;
  int r = 4;
  std::vector<int> hidden_sizes{100, 100};
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  bool clip_gradients = false;
  double clip_value = 100.0;  // infinity-norm bound when clipping
  bool alternate_orderings = true;
  int shards = 1;  // fixed gradient reduction order, see nll_and_grad

  void validate() const;
};

// Flat parameter vector and the matching gradient.
struct GradTape {
  Eigen::VectorXd params;
  Eigen::VectorXd grad;
};

struct NllGrad {
  double nll = 0.0;
  GradTape tape;
};

// Mean negative log-likelihood of `batch` (n x d, one row per point) and its
// exact gradient with respect to every conditioner parameter. With shards > 1
// the rows are split into that many contiguous chunks evaluated on separate
// threads; partial sums are reduced in chunk order so the result depends only
// on the shard count, never on scheduling.
NllGrad nll_and_grad(const FlowModel& model, const Eigen::MatrixXd& batch,
                     int shards = 1);

double mean_nll(const FlowModel& model, const Eigen::MatrixXd& rows);

class Adam {
 public:
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;  // NaN when there is no validation split
};

struct FitResult {
  FlowModel model;
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Maximum-likelihood fit. The standardizer is estimated on the training
// split; the returned parameters are those with the best validation NLL, or
// the final ones when val_fraction == 0.
FitResult fit(const Eigen::MatrixXd& data, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

Standardizer fit_standardizer(const Eigen::MatrixXd& rows);

inline constexpr int kCheckpointVersion = 1;

void save(const FlowModel& model, const std::filesystem::path& path);
FlowModel load(const std::filesystem::path& path);

// In-memory form of the checkpoint container.
std::string serialize(const FlowModel& model);
FlowModel deserialize(const std::string& bytes);

}  // namespace sosflow
