#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cwnet/errors.hpp"
#include "cwnet/pipeline.hpp"
#include "cwnet/rng.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct SeedFlags {
  std::uint64_t master = 0;
  std::uint64_t data_seed = 0, init_seed = 0, dropout_seed = 0;
  bool have_master = false;
  bool have_data = false, have_init = false, have_dropout = false;
};

// --seed fans out to the named seeds via fixed derivation indices; the
// specific flags win over the master
void resolve_seeds(const SeedFlags& f, std::optional<std::uint64_t>& split,
                   std::uint64_t& init, std::uint64_t& dropout) {
  if (f.have_data)
    split = f.data_seed;
  else if (f.have_master)
    split = cwnet::derive_seed(f.master, 0);
  if (f.have_init)
    init = f.init_seed;
  else if (f.have_master)
    init = cwnet::derive_seed(f.master, 1);
  if (f.have_dropout)
    dropout = f.dropout_seed;
  else if (f.have_master)
    dropout = cwnet::derive_seed(f.master, 2);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hodge-Laplacian neural networks on CW-complexes"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Sample a synthetic dataset");
  cwnet::GenerateRun gen_run;
  gen->add_option("--n", gen_run.config.dataset_size, "Number of complexes")
      ->capture_default_str();
  gen->add_option("--seed", gen_run.config.seed, "Generator seed")
      ->capture_default_str();
  gen->add_option("--dimension", gen_run.config.dimension, "Top cell dimension")
      ->capture_default_str();
  gen->add_option("--max-profile", gen_run.config.max_profile,
                  "Padded cell counts per dimension")
      ->expected(-1)
      ->capture_default_str();
  gen->add_option("--min-cells", gen_run.config.min_cells,
                  "Minimum real cells per dimension")
      ->expected(-1)
      ->capture_default_str();
  gen->add_option("--out", gen_run.out_path, "Output CWDS path")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  cwnet::TrainRun tr_run;
  std::string tr_model;
  SeedFlags tr_seeds;
  double tr_lr = 0.0, tr_momentum = 0.0, tr_decay = 0.0, tr_dropout = 0.0;
  int tr_steps = 400;
  tr->add_option("--data", tr_run.data_path, "CWDS dataset path")->required();
  tr->add_option("--model", tr_model, "cwcnn or cwat")->required();
  auto* lr_opt = tr->add_option("--lr", tr_lr, "Learning rate");
  auto* mom_opt = tr->add_option("--momentum", tr_momentum, "Momentum");
  auto* dec_opt = tr->add_option("--weight-decay", tr_decay, "Weight decay");
  auto* drop_opt = tr->add_option("--dropout", tr_dropout,
                                  "Dropout probability (cwat)");
  tr->add_option("--steps", tr_steps, "Training steps")->capture_default_str();
  tr->add_option("--split", tr_run.split_fraction, "Train fraction")
      ->capture_default_str();
  tr->add_flag("--standardize-targets", tr_run.standardize_targets,
               "Optimize z-scored targets, report raw-unit RMSE");
  tr->add_option("--params-out", tr_run.params_path, "Parameters output path")
      ->capture_default_str();
  tr->add_option("--history-out", tr_run.history_path, "History CSV path")
      ->capture_default_str();
  tr->add_option("--seed", tr_seeds.master, "Master seed for all randomness");
  tr->add_option("--data-seed", tr_seeds.data_seed,
                 "Split seed (default: the dataset's stored seed)");
  tr->add_option("--init-seed", tr_seeds.init_seed, "Initialization seed");
  tr->add_option("--dropout-seed", tr_seeds.dropout_seed, "Dropout seed");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate saved parameters");
  cwnet::EvalRun ev_run;
  std::string ev_model;
  SeedFlags ev_seeds;
  ev->add_option("--data", ev_run.data_path, "CWDS dataset path")->required();
  ev->add_option("--params", ev_run.params_path, "CWPM parameters path")
      ->required();
  ev->add_option("--model", ev_model, "cwcnn or cwat")->required();
  ev->add_option("--split", ev_run.split_fraction,
                 "Evaluate the test side of this split (0: whole dataset)")
      ->capture_default_str();
  ev->add_option("--data-seed", ev_seeds.data_seed,
                 "Split seed (default: the dataset's stored seed)");
  ev->add_option("--seed", ev_seeds.master, "Master seed");

  // validate
  auto* va = app.add_subcommand("validate", "Check complex invariants");
  std::string va_data;
  va->add_option("--data", va_data, "CWDS dataset path")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "Finite-difference gradient comparison");
  cwnet::GradcheckRun gc_run;
  std::string gc_model = "cwcnn";
  gc->add_option("--model", gc_model, "cwcnn or cwat")->capture_default_str();
  gc->add_option("--data", gc_run.data_path,
                 "CWDS dataset path (default: one generated sample)");
  gc->add_option("--index", gc_run.index, "Item index")->capture_default_str();
  gc->add_option("--data-seed", gc_run.data_seed, "Sample seed")
      ->capture_default_str();
  gc->add_option("--init-seed", gc_run.init_seed, "Initialization seed")
      ->capture_default_str();
  gc->add_option("--tol", gc_run.tolerance, "Max relative error accepted")
      ->capture_default_str();
  gc->add_option("--step", gc_run.step, "Finite-difference step")
      ->capture_default_str();

  // inspect
  auto* in = app.add_subcommand("inspect", "Pretty-print one dataset item");
  std::string in_data;
  int in_index = 0;
  in->add_option("--data", in_data, "CWDS dataset path")->required();
  in->add_option("--index", in_index, "Item index")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e); // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      cwnet::run_generate(gen_run, std::cout);
      return 0;
    }
    if (tr->parsed()) {
      tr_run.kind = cwnet::model_kind_from_name(tr_model);
      tr_run.optimizer = cwnet::default_optimizer(tr_run.kind);
      tr_run.optimizer.steps = tr_steps;
      if (lr_opt->count()) tr_run.optimizer.learning_rate = tr_lr;
      if (mom_opt->count()) tr_run.optimizer.momentum = tr_momentum;
      if (dec_opt->count()) tr_run.optimizer.weight_decay = tr_decay;
      if (drop_opt->count()) tr_run.dropout = tr_dropout;
      tr_seeds.have_master = tr->count("--seed") > 0;
      tr_seeds.have_data = tr->count("--data-seed") > 0;
      tr_seeds.have_init = tr->count("--init-seed") > 0;
      tr_seeds.have_dropout = tr->count("--dropout-seed") > 0;
      resolve_seeds(tr_seeds, tr_run.split_seed, tr_run.init_seed,
                    tr_run.dropout_seed);
      cwnet::run_train(tr_run, std::cout);
      return 0;
    }
    if (ev->parsed()) {
      ev_run.kind = cwnet::model_kind_from_name(ev_model);
      ev_seeds.have_master = ev->count("--seed") > 0;
      ev_seeds.have_data = ev->count("--data-seed") > 0;
      std::uint64_t unused_init = 0, unused_drop = 0;
      resolve_seeds(ev_seeds, ev_run.split_seed, unused_init, unused_drop);
      cwnet::run_eval(ev_run, std::cout);
      return 0;
    }
    if (va->parsed())
      return cwnet::run_validate(va_data, std::cout) ? 0 : kExitData;
    if (gc->parsed()) {
      gc_run.kind = cwnet::model_kind_from_name(gc_model);
      const double err = cwnet::run_gradcheck(gc_run, std::cout);
      return err <= gc_run.tolerance ? 0 : kExitNumeric;
    }
    if (in->parsed()) {
      cwnet::run_inspect(in_data, in_index, std::cout);
      return 0;
    }
  } catch (const cwnet::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const cwnet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
