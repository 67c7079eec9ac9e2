#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwnet/layers.hpp"
#include "cwnet/synth.hpp"

namespace cwnet {

enum class ModelKind { CwCnn, CwAt };

ModelKind model_kind_from_name(const std::string& name); // "cwcnn" / "cwat"
std::string model_kind_name(ModelKind kind);

struct OptimizerConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int steps = 400;
};

void check_optimizer(const OptimizerConfig& cfg); // throws std::invalid_argument

// per-model defaults: cwcnn momentum 0.9, cwat momentum 0.7 decay 0.02
OptimizerConfig default_optimizer(ModelKind kind);

// v <- momentum v + g + decay w; w <- w - lr v
void sgd_step(ParamVec& params, std::vector<Mat>& velocity,
              const std::vector<Mat>& grads, const OptimizerConfig& cfg);

// mean squared residual as one tape node; d/d pred_i = 2 (pred_i - y_i) / M
Tensor mse_loss(Tape& t, const std::vector<Tensor>& preds, const Vec& targets);

double rmse(const Vec& preds, const Vec& targets);

// architecture choice plus its learnable state
struct Model {
  ModelKind kind = ModelKind::CwCnn;
  CwCnnConfig cnn;
  CwAtConfig at;
  ParamVec params;
  const std::vector<int>& profile() const {
    return kind == ModelKind::CwCnn ? cnn.profile : at.profile;
  }
};

Model make_model(ModelKind kind, std::vector<int> profile,
                 std::uint64_t init_seed);

Tensor model_forward(Tape& t, const Model& m, const CWComplex& cx,
                     const BoundParams& bp, const ForwardOptions& opt = {});

long count_parameters(const Model& m);

struct TrainHistory {
  std::vector<double> losses;       // train mse; losses[0] belongs to step 1
  std::vector<double> step_seconds; // wall clock, not serialized
  double test_rmse = 0.0;
  long parameter_count = 0;
};

struct TrainConfig {
  OptimizerConfig optimizer;
  std::uint64_t dropout_seed = 2;
  // z-score targets with train-set statistics during optimization, then fold
  // the inverse affine map into the final linear layer so saved parameters
  // and RMSE stay in raw target units
  bool standardize_targets = false;
};

// Full-batch SGD with momentum over the train split; gradients accumulate
// over samples in a fixed order, so runs are bitwise reproducible. Evaluates
// test RMSE with dropout off. Throws NumericError at the first non-finite
// loss or gradient, naming the step.
TrainHistory train_model(Model& m, const Dataset& train, const Dataset& test,
                         const TrainConfig& cfg);

double evaluate_rmse(const Model& m, const Dataset& data);

// CWPM text format: header, then per tensor a shape line and row-major values
void save_params(const ParamVec& p, const std::string& path);
ParamVec load_params(const std::string& path);

// "step,loss" header, one row per step, then test_rmse and parameters rows
void save_history_csv(const TrainHistory& h, const std::string& path);

} // namespace cwnet
