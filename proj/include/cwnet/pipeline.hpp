#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "cwnet/synth.hpp"
#include "cwnet/train.hpp"

namespace cwnet {

// Shared command implementations. Each run_* writes its files, prints its
// report to `out`, and throws std::invalid_argument (usage), DataError or
// NumericError for the caller to map to an exit code. Output carries no
// timestamps, so identical runs produce identical bytes.

struct GenerateRun {
  GeneratorConfig config;
  std::string out_path;
};

// writes the CWDS file and a <out>.manifest; returns the dataset
Dataset run_generate(const GenerateRun& run, std::ostream& out);

struct TrainRun {
  std::string data_path;
  ModelKind kind = ModelKind::CwCnn;
  OptimizerConfig optimizer;
  double dropout = 0.1; // cwat only
  double split_fraction = 0.8;
  std::optional<std::uint64_t> split_seed; // default: the dataset's own seed
  std::uint64_t init_seed = 1;
  std::uint64_t dropout_seed = 2;
  bool standardize_targets = false;
  std::string params_path = "params.cwpm";
  std::string history_path = "history.csv";
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

// trains on the split, writes params + history CSV + <params>.manifest,
// echoes hyperparameters and prints test_rmse= and parameters=
TrainResult run_train(const TrainRun& run, std::ostream& out);

struct EvalRun {
  std::string data_path;
  std::string params_path;
  ModelKind kind = ModelKind::CwCnn;
  double split_fraction = 0.0; // 0: evaluate the whole dataset
  std::optional<std::uint64_t> split_seed;
};

// prints rmse=<value> and returns it
double run_eval(const EvalRun& run, std::ostream& out);

// prints one line per item plus a summary; true iff every item passes
bool run_validate(const std::string& data_path, std::ostream& out);

struct GradcheckRun {
  ModelKind kind = ModelKind::CwCnn;
  std::string data_path; // empty: one generated sample
  int index = 0;
  std::uint64_t data_seed = 42;
  std::uint64_t init_seed = 1;
  double tolerance = 1e-4;
  double step = 1e-5;
};

// finite differences against the tape on one sample; prints max_rel_err=
double run_gradcheck(const GradcheckRun& run, std::ostream& out);

// pretty-prints one item: sizes, incidence, Laplacian spectra at identity
// weights (real-cell block)
void run_inspect(const std::string& data_path, int index, std::ostream& out);

} // namespace cwnet
