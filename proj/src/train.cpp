#include "cwnet/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cwnet/errors.hpp"
#include "cwnet/rng.hpp"
#include "cwnet/textio.hpp"

namespace cwnet {

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "cwcnn") return ModelKind::CwCnn;
  if (name == "cwat") return ModelKind::CwAt;
  throw std::invalid_argument("unknown model '" + name +
                              "' (valid: cwcnn, cwat)");
}

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::CwCnn ? "cwcnn" : "cwat";
}

void check_optimizer(const OptimizerConfig& cfg) {
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("optimizer: learning rate must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw std::invalid_argument("optimizer: momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0))
    throw std::invalid_argument("optimizer: weight decay must be nonnegative");
  if (cfg.steps < 1)
    throw std::invalid_argument("optimizer: steps must be at least 1");
}

OptimizerConfig default_optimizer(ModelKind kind) {
  OptimizerConfig cfg;
  if (kind == ModelKind::CwAt) {
    cfg.momentum = 0.7;
    cfg.weight_decay = 0.02;
  }
  return cfg;
}

void sgd_step(ParamVec& params, std::vector<Mat>& velocity,
              const std::vector<Mat>& grads, const OptimizerConfig& cfg) {
  const size_t n = params.values.size();
  if (velocity.size() != n || grads.size() != n)
    throw std::invalid_argument("sgd_step: params/velocity/grads disagree");
  for (size_t i = 0; i < n; ++i) {
    Mat& w = params.values[i];
    Mat& v = velocity[i];
    const Mat& g = grads[i];
    if (v.rows() != w.rows() || v.cols() != w.cols() || g.rows() != w.rows() ||
        g.cols() != w.cols())
      throw std::invalid_argument("sgd_step: shape mismatch at " +
                                  params.names[i]);
    v = cfg.momentum * v + g + cfg.weight_decay * w;
    w -= cfg.learning_rate * v;
  }
}

Tensor mse_loss(Tape& t, const std::vector<Tensor>& preds, const Vec& targets) {
  if (preds.empty() || static_cast<int>(preds.size()) != targets.size())
    throw std::invalid_argument("mse_loss: preds/targets length mismatch");
  const int m = static_cast<int>(preds.size());
  std::vector<std::uint32_t> ids(preds.size());
  bool tracked = false;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    if (preds[static_cast<size_t>(i)].rows() != 1 ||
        preds[static_cast<size_t>(i)].cols() != 1)
      throw std::invalid_argument("mse_loss: predictions must be 1x1");
    ids[static_cast<size_t>(i)] = preds[static_cast<size_t>(i)].id();
    tracked = tracked || preds[static_cast<size_t>(i)].tracked();
    const double r = preds[static_cast<size_t>(i)].value()(0, 0) - targets(i);
    sum += r * r;
  }
  Mat out(1, 1);
  out(0, 0) = sum / m;
  if (!tracked) return t.constant(std::move(out));
  Vec y = targets;
  return t.record(std::move(out), true,
                  [ids = std::move(ids), y = std::move(y), m](Tape& t,
                                                              const Mat& g) {
                    for (int i = 0; i < m; ++i) {
                      const double r =
                          t.node_value(ids[static_cast<size_t>(i)])(0, 0) -
                          y(i);
                      t.accumulate(ids[static_cast<size_t>(i)],
                                   Mat::Constant(1, 1, 2.0 * r / m * g(0, 0)));
                    }
                  });
}

double rmse(const Vec& preds, const Vec& targets) {
  if (preds.size() == 0 || preds.size() != targets.size())
    throw std::invalid_argument("rmse: preds/targets length mismatch");
  return std::sqrt((preds - targets).squaredNorm() /
                   static_cast<double>(preds.size()));
}

Model make_model(ModelKind kind, std::vector<int> profile,
                 std::uint64_t init_seed) {
  Model m;
  m.kind = kind;
  if (kind == ModelKind::CwCnn) {
    m.cnn = default_cwcnn_config(std::move(profile));
    m.params = init_cwcnn_params(m.cnn, init_seed);
  } else {
    m.at = default_cwat_config(std::move(profile));
    m.params = init_cwat_params(m.at, init_seed);
  }
  return m;
}

Tensor model_forward(Tape& t, const Model& m, const CWComplex& cx,
                     const BoundParams& bp, const ForwardOptions& opt) {
  if (m.kind == ModelKind::CwCnn) return cwcnn_forward(t, cx, m.cnn, bp);
  return cwat_forward(t, cx, m.at, bp, opt);
}

long count_parameters(const Model& m) { return m.params.scalar_count(); }

namespace {

// pred in raw units for one frozen-parameter sample
double predict(Tape& t, const Model& m, const CWComplex& cx) {
  t.clear();
  BoundParams bp = bind_constants(t, m.params);
  return model_forward(t, m, cx, bp).value()(0, 0);
}

} // namespace

TrainHistory train_model(Model& m, const Dataset& train, const Dataset& test,
                         const TrainConfig& cfg) {
  check_optimizer(cfg.optimizer);
  if (train.items.empty())
    throw std::invalid_argument("train_model: empty train split");

  double mu = 0.0, sigma = 1.0;
  if (cfg.standardize_targets) {
    double s1 = 0.0, s2 = 0.0;
    for (const DatasetItem& it : train.items) {
      s1 += it.target;
      s2 += it.target * it.target;
    }
    const double n = static_cast<double>(train.items.size());
    mu = s1 / n;
    const double var = s2 / n - mu * mu;
    sigma = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  const int batch = static_cast<int>(train.items.size());
  std::vector<Mat> velocity, grads;
  velocity.reserve(m.params.values.size());
  grads.reserve(m.params.values.size());
  for (const Mat& w : m.params.values) {
    velocity.push_back(Mat::Zero(w.rows(), w.cols()));
    grads.push_back(Mat::Zero(w.rows(), w.cols()));
  }

  Tape tape;
  TrainHistory hist;
  hist.parameter_count = m.params.scalar_count();
  hist.losses.reserve(static_cast<size_t>(cfg.optimizer.steps));
  for (int step = 0; step < cfg.optimizer.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    for (Mat& g : grads) g.setZero();
    double loss_sum = 0.0;
    const std::uint64_t step_seed = derive_seed(cfg.dropout_seed,
                                                static_cast<std::uint64_t>(step));
    for (int s = 0; s < batch; ++s) {
      const DatasetItem& item = train.items[static_cast<size_t>(s)];
      tape.clear();
      BoundParams bp = bind_leaves(tape, m.params);
      Rng drop_rng(derive_seed(step_seed, static_cast<std::uint64_t>(s)));
      ForwardOptions opt;
      if (m.kind == ModelKind::CwAt && m.at.dropout > 0.0) {
        opt.train_mode = true;
        opt.dropout_rng = &drop_rng;
      }
      Tensor pred = model_forward(tape, m, item.complex, bp, opt);
      const double r = pred.value()(0, 0) - (item.target - mu) / sigma;
      loss_sum += r * r;
      tape.backward(pred, 2.0 * r / batch);
      for (size_t i = 0; i < grads.size(); ++i) {
        const Mat& g = bp.leaves[i].grad();
        if (g.size() != 0) grads[i] += g;
      }
    }
    const double loss = loss_sum / batch;
    hist.losses.push_back(loss);
    bool finite = std::isfinite(loss);
    for (const Mat& g : grads) finite = finite && g.allFinite();
    if (!finite)
      throw NumericError("non-finite loss or gradient at step " +
                         std::to_string(step + 1));
    sgd_step(m.params, velocity, grads, cfg.optimizer);
    hist.step_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count());
  }

  if (cfg.standardize_targets) {
    // raw = sigma z + mu absorbed into the last affine map
    const std::string w_name = m.kind == ModelKind::CwCnn ? "out_w" : "final_w";
    const std::string b_name = m.kind == ModelKind::CwCnn ? "out_b" : "final_b";
    m.params.at(w_name) *= sigma;
    Mat& b = m.params.at(b_name);
    b = (sigma * b).array() + mu;
  }

  hist.test_rmse = test.items.empty() ? 0.0 : evaluate_rmse(m, test);
  return hist;
}

double evaluate_rmse(const Model& m, const Dataset& data) {
  if (data.items.empty())
    throw std::invalid_argument("evaluate_rmse: empty dataset");
  Tape tape;
  double sum = 0.0;
  for (const DatasetItem& it : data.items) {
    const double r = predict(tape, m, it.complex) - it.target;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(data.items.size()));
}

void save_params(const ParamVec& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "CWPM 1\n";
  for (size_t i = 0; i < p.values.size(); ++i) {
    const Mat& w = p.values[i];
    os << "tensor " << p.names[i] << " " << w.rows() << " " << w.cols() << "\n";
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        if (c) os << " ";
        os << format_double(w(r, c));
      }
      os << "\n";
    }
  }
  if (!os) throw DataError("write failed: " + path);
}

ParamVec load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  LineReader rd(is);
  auto toks = rd.next();
  if (toks.size() != 2 || toks[0] != "CWPM") rd.fail("expected 'CWPM <version>'");
  if (toks[1] != "1") rd.fail("unsupported CWPM version " + toks[1]);
  ParamVec p;
  while (true) {
    toks = rd.next();
    if (toks.empty()) break;
    if (toks.size() != 4 || toks[0] != "tensor")
      rd.fail("expected 'tensor <name> <rows> <cols>'");
    const std::string name = toks[1];
    const long rows = rd.parse_int(toks[2], "rows");
    const long cols = rd.parse_int(toks[3], "cols");
    if (rows < 1 || cols < 1 || rows > 100000 || cols > 100000)
      rd.fail("unreasonable tensor shape for " + name);
    Mat w(rows, cols);
    for (long r = 0; r < rows; ++r) {
      toks = rd.next();
      if (static_cast<long>(toks.size()) != cols)
        rd.fail("expected " + std::to_string(cols) + " values for " + name);
      for (long c = 0; c < cols; ++c)
        w(r, c) = rd.parse_real(toks[static_cast<size_t>(c)], name.c_str());
    }
    try {
      p.add(name, std::move(w));
    } catch (const std::invalid_argument& e) {
      rd.fail(e.what());
    }
  }
  if (p.count() == 0) rd.fail("no tensors in parameter file");
  return p;
}

void save_history_csv(const TrainHistory& h, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "step,loss\n";
  for (size_t i = 0; i < h.losses.size(); ++i)
    os << i + 1 << "," << format_double(h.losses[i]) << "\n";
  os << "test_rmse," << format_double(h.test_rmse) << "\n";
  os << "parameters," << h.parameter_count << "\n";
  if (!os) throw DataError("write failed: " + path);
}

} // namespace cwnet
