#include "cwnet/pipeline.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "cwnet/errors.hpp"
#include "cwnet/gradcheck.hpp"
#include "cwnet/hodge.hpp"
#include "cwnet/rng.hpp"
#include "cwnet/textio.hpp"

namespace cwnet {

namespace {

void write_manifest(const std::string& path, const std::string& body) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << body;
  if (!os) throw DataError("write failed: " + path);
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += " ";
    s += std::to_string(v[i]);
  }
  return s;
}

Dataset load_or_fail(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("missing dataset path");
  return load_dataset(path);
}

const DatasetItem& item_at(const Dataset& d, int index) {
  if (index < 0 || index >= d.size())
    throw DataError("item index " + std::to_string(index) +
                    " outside dataset of " + std::to_string(d.size()));
  return d.items[static_cast<size_t>(index)];
}

} // namespace

Dataset run_generate(const GenerateRun& run, std::ostream& out) {
  if (run.out_path.empty()) throw std::invalid_argument("missing output path");
  check_config(run.config);
  GenerationStats stats;
  Dataset d = generate_dataset(run.config, &stats);
  save_dataset(d, run.out_path);

  std::string manifest = "cwnet-manifest generate\n";
  manifest += "dataset " + run.out_path + "\n";
  manifest += "items " + std::to_string(d.size()) + "\n";
  manifest += "dimension " + std::to_string(run.config.dimension) + "\n";
  manifest += "max_profile " + join_ints(run.config.max_profile) + "\n";
  manifest += "min_cells " + join_ints(run.config.min_cells) + "\n";
  manifest += "seed " + std::to_string(run.config.seed) + "\n";
  write_manifest(run.out_path + ".manifest", manifest);

  double s1 = 0.0, s2 = 0.0;
  std::map<long, int> hist;
  for (const DatasetItem& it : d.items) {
    s1 += it.target;
    s2 += it.target * it.target;
    ++hist[static_cast<long>(it.target)];
  }
  const double n = static_cast<double>(d.size());
  const double mean = s1 / n;
  const double var = std::max(0.0, s2 / n - mean * mean);
  out << "items=" << d.size() << "\n";
  out << "target_mean=" << format_double(mean) << "\n";
  out << "target_std=" << format_double(std::sqrt(var)) << "\n";
  out << "total_cells histogram:\n";
  for (const auto& [cells, count] : hist)
    out << "  " << cells << ": " << count << "\n";
  if (stats.clamped_edge_ranges)
    out << "note: edge budget clamped to the simple-graph maximum in "
        << stats.clamped_edge_ranges << " items\n";
  if (stats.forced_empty_top)
    out << "note: no spare edge for any 2-cell in " << stats.forced_empty_top
        << " items\n";
  return d;
}

TrainResult run_train(const TrainRun& run, std::ostream& out) {
  Dataset data = load_or_fail(run.data_path);
  const std::uint64_t split_seed = run.split_seed.value_or(data.seed);
  if (!(run.split_fraction > 0.0 && run.split_fraction < 1.0))
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  auto [train_set, test_set] = split_dataset(data, run.split_fraction, split_seed);

  TrainResult res;
  res.model = make_model(run.kind, data.max_profile, run.init_seed);
  if (run.kind == ModelKind::CwAt) {
    if (!(run.dropout >= 0.0 && run.dropout < 1.0))
      throw std::invalid_argument("dropout must lie in [0, 1)");
    res.model.at.dropout = run.dropout;
  }

  out << "model=" << model_kind_name(run.kind) << "\n";
  out << "lr=" << format_double(run.optimizer.learning_rate) << "\n";
  out << "momentum=" << format_double(run.optimizer.momentum) << "\n";
  out << "weight_decay=" << format_double(run.optimizer.weight_decay) << "\n";
  if (run.kind == ModelKind::CwAt)
    out << "dropout=" << format_double(run.dropout) << "\n";
  out << "steps=" << run.optimizer.steps << "\n";
  out << "split=" << format_double(run.split_fraction) << "\n";
  out << "split_seed=" << split_seed << "\n";
  out << "init_seed=" << run.init_seed << "\n";
  out << "dropout_seed=" << run.dropout_seed << "\n";
  out << "train_items=" << train_set.size() << "\n";
  out << "test_items=" << test_set.size() << "\n";
  out.flush();

  TrainConfig tc;
  tc.optimizer = run.optimizer;
  tc.dropout_seed = run.dropout_seed;
  tc.standardize_targets = run.standardize_targets;
  res.history = train_model(res.model, train_set, test_set, tc);

  save_params(res.model.params, run.params_path);
  save_history_csv(res.history, run.history_path);

  std::string manifest = "cwnet-manifest train\n";
  manifest += "data " + run.data_path + "\n";
  manifest += "model " + model_kind_name(run.kind) + "\n";
  manifest += "lr " + format_double(run.optimizer.learning_rate) + "\n";
  manifest += "momentum " + format_double(run.optimizer.momentum) + "\n";
  manifest += "weight_decay " + format_double(run.optimizer.weight_decay) + "\n";
  if (run.kind == ModelKind::CwAt)
    manifest += "dropout " + format_double(run.dropout) + "\n";
  manifest += "steps " + std::to_string(run.optimizer.steps) + "\n";
  manifest += "split " + format_double(run.split_fraction) + "\n";
  manifest += "split_seed " + std::to_string(split_seed) + "\n";
  manifest += "init_seed " + std::to_string(run.init_seed) + "\n";
  manifest += "dropout_seed " + std::to_string(run.dropout_seed) + "\n";
  manifest += "standardize_targets " +
              std::string(run.standardize_targets ? "1" : "0") + "\n";
  manifest += "params " + run.params_path + "\n";
  manifest += "history " + run.history_path + "\n";
  write_manifest(run.params_path + ".manifest", manifest);

  out << "final_loss=" << format_double(res.history.losses.back()) << "\n";
  out << "test_rmse=" << format_double(res.history.test_rmse) << "\n";
  out << "parameters=" << res.history.parameter_count << "\n";
  return res;
}

double run_eval(const EvalRun& run, std::ostream& out) {
  Dataset data = load_or_fail(run.data_path);
  Model m = make_model(run.kind, data.max_profile, 0);
  ParamVec loaded = load_params(run.params_path);
  if (loaded.names != m.params.names)
    throw DataError("parameter file does not list the expected tensors for " +
                    model_kind_name(run.kind));
  for (int i = 0; i < loaded.count(); ++i) {
    const Mat& a = loaded.values[static_cast<size_t>(i)];
    const Mat& b = m.params.values[static_cast<size_t>(i)];
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw DataError("tensor " + loaded.names[static_cast<size_t>(i)] +
                      " has shape " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + ", expected " +
                      std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
  m.params = std::move(loaded);

  double value = 0.0;
  if (run.split_fraction > 0.0) {
    if (run.split_fraction >= 1.0)
      throw std::invalid_argument("split fraction must lie in (0, 1)");
    auto [train_set, test_set] =
        split_dataset(data, run.split_fraction,
                      run.split_seed.value_or(data.seed));
    out << "test_items=" << test_set.size() << "\n";
    value = evaluate_rmse(m, test_set);
  } else {
    out << "items=" << data.size() << "\n";
    value = evaluate_rmse(m, data);
  }
  out << "rmse=" << format_double(value) << "\n";
  return value;
}

bool run_validate(const std::string& data_path, std::ostream& out) {
  Dataset data = load_or_fail(data_path);
  bool all_ok = true;
  for (int i = 0; i < data.size(); ++i) {
    ValidationReport rep = validate(data.items[static_cast<size_t>(i)].complex);
    if (rep.ok()) {
      out << "item " << i << ": ok\n";
    } else {
      all_ok = false;
      for (const Violation& v : rep.violations)
        out << "item " << i << ": " << v.rule << " at " << v.location << ": "
            << v.message << "\n";
    }
  }
  out << (all_ok ? "all " : "FAILED: ") << data.size() << " items checked\n";
  return all_ok;
}

double run_gradcheck(const GradcheckRun& run, std::ostream& out) {
  CWComplex cx;
  if (run.data_path.empty()) {
    GeneratorConfig cfg;
    cfg.seed = run.data_seed;
    cx = random_complex(cfg, derive_seed(cfg.seed, 0));
  } else {
    Dataset data = load_or_fail(run.data_path);
    cx = item_at(data, run.index).complex;
  }
  Model m = make_model(run.kind, cx.sizes, run.init_seed);

  LossFn f = [&m, &cx](Tape& t, const std::vector<Tensor>& in) {
    BoundParams bp;
    bp.params = &m.params;
    bp.leaves = in;
    return model_forward(t, m, cx, bp); // eval mode: no dropout
  };
  GradCheckReport rep = grad_check(f, m.params.values, run.step);

  out << "model=" << model_kind_name(run.kind) << "\n";
  out << "coords=" << rep.coords << "\n";
  out << "worst=" << m.params.names[rep.worst_input] << "(" << rep.worst_row
      << "," << rep.worst_col << ")\n";
  out << "analytic=" << format_double(rep.analytic) << "\n";
  out << "numeric=" << format_double(rep.numeric) << "\n";
  out << "max_rel_err=" << format_double(rep.max_rel_err) << "\n";
  out << (rep.pass(run.tolerance) ? "pass" : "FAIL") << " tol="
      << format_double(run.tolerance) << "\n";
  return rep.max_rel_err;
}

void run_inspect(const std::string& data_path, int index, std::ostream& out) {
  Dataset data = load_or_fail(data_path);
  const DatasetItem& it = item_at(data, index);
  const CWComplex& cx = it.complex;
  out << "item " << index << " of " << data.size() << "\n";
  out << "target=" << format_double(it.target) << "\n";
  out << "sizes: " << join_ints(cx.sizes) << "\n";
  out << "real: " << join_ints(cx.real_counts) << "\n";
  for (int k = 1; k <= cx.dimension; ++k) {
    const IMat& b = cx.boundary(k);
    out << "B " << k << " (" << b.rows() << "x" << b.cols() << ")\n";
    for (int r = 0; r < b.rows(); ++r) {
      for (int c = 0; c < b.cols(); ++c) {
        if (c) out << " ";
        out << b(r, c);
      }
      out << "\n";
    }
  }
  WeightStack ws = identity_weights(cx);
  for (int k = 0; k <= cx.dimension; ++k) {
    out << "delta_" << k << " spectrum:";
    const int real_n = cx.real(k);
    if (real_n == 0) {
      out << " (no real cells)\n";
      continue;
    }
    Mat full = hodge_laplacian(cx, k, ws);
    Eigen::MatrixXd block = full.topLeftCorner(real_n, real_n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block,
                                                      Eigen::EigenvaluesOnly);
    for (int i = 0; i < real_n; ++i)
      out << " " << format_double(es.eigenvalues()(i));
    out << "\n";
  }
}

} // namespace cwnet
