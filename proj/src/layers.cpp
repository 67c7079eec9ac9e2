#include "cwnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cwnet {

int ParamVec::add(std::string name, Mat value) {
  if (index_of(name) >= 0)
    throw std::invalid_argument("duplicate parameter name: " + name);
  int idx = static_cast<int>(values.size());
  auto pos = std::lower_bound(
      index_.begin(), index_.end(), name,
      [](const auto& entry, const std::string& n) { return entry.first < n; });
  index_.insert(pos, {name, idx});
  names.push_back(std::move(name));
  values.push_back(std::move(value));
  return idx;
}

int ParamVec::index_of(const std::string& name) const {
  auto pos = std::lower_bound(
      index_.begin(), index_.end(), name,
      [](const auto& entry, const std::string& n) { return entry.first < n; });
  if (pos == index_.end() || pos->first != name) return -1;
  return pos->second;
}

const Mat& ParamVec::at(const std::string& name) const {
  int idx = index_of(name);
  if (idx < 0) throw std::invalid_argument("unknown parameter: " + name);
  return values[static_cast<size_t>(idx)];
}

Mat& ParamVec::at(const std::string& name) {
  int idx = index_of(name);
  if (idx < 0) throw std::invalid_argument("unknown parameter: " + name);
  return values[static_cast<size_t>(idx)];
}

long ParamVec::scalar_count() const {
  long total = 0;
  for (const Mat& m : values) total += static_cast<long>(m.size());
  return total;
}

bool operator==(const ParamVec& a, const ParamVec& b) {
  if (a.names != b.names) return false;
  for (size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i].rows() != b.values[i].rows() ||
        a.values[i].cols() != b.values[i].cols() ||
        a.values[i] != b.values[i])
      return false;
  }
  return true;
}

const Tensor& BoundParams::at(const std::string& name) const {
  int idx = params ? params->index_of(name) : -1;
  if (idx < 0) throw std::invalid_argument("unbound parameter: " + name);
  return leaves[static_cast<size_t>(idx)];
}

BoundParams bind_leaves(Tape& t, const ParamVec& p) {
  BoundParams bp;
  bp.params = &p;
  bp.leaves.reserve(p.values.size());
  for (const Mat& m : p.values) bp.leaves.push_back(t.leaf(m));
  return bp;
}

BoundParams bind_constants(Tape& t, const ParamVec& p) {
  BoundParams bp;
  bp.params = &p;
  bp.leaves.reserve(p.values.size());
  for (const Mat& m : p.values) bp.leaves.push_back(t.constant(m));
  return bp;
}

FeatureMap feature_map_from_name(const std::string& name) {
  if (name == "identity") return FeatureMap::Identity;
  if (name == "degree") return FeatureMap::Degree;
  throw std::invalid_argument("unknown feature map: " + name);
}

CwCnnConfig default_cwcnn_config(std::vector<int> profile) {
  CwCnnConfig cfg;
  cfg.profile = std::move(profile);
  if (cfg.profile.size() < 2)
    throw std::invalid_argument("cwcnn: profile needs dimension >= 1");
  cfg.activations.assign(cfg.profile.size() - 1, Activation::LeakyRelu);
  return cfg;
}

CwAtConfig default_cwat_config(std::vector<int> profile) {
  CwAtConfig cfg;
  cfg.profile = std::move(profile);
  if (cfg.profile.size() < 2)
    throw std::invalid_argument("cwat: profile needs dimension >= 1");
  return cfg;
}

namespace {

Mat he_dense(Rng& rng, int rows, int cols, int fan_in) {
  const double sd = std::sqrt(2.0 / std::max(1, fan_in));
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = sd * rng.normal();
  return m;
}

Mat uniform_column(Rng& rng, int size, double lo, double hi) {
  Mat m(size, 1);
  for (int r = 0; r < size; ++r) m(r, 0) = rng.uniform_real(lo, hi);
  return m;
}

Mat stacked_identity(int copies, int n) {
  Mat m = Mat::Zero(copies * n, n);
  for (int c = 0; c < copies; ++c)
    m.middleRows(c * n, n) = Mat::Identity(n, n) / copies;
  return m;
}

} // namespace

ParamVec init_cwcnn_params(const CwCnnConfig& cfg, std::uint64_t init_seed) {
  const int n = static_cast<int>(cfg.profile.size()) - 1;
  if (n < 1) throw std::invalid_argument("cwcnn: profile needs dimension >= 1");
  if (cfg.activations.size() != static_cast<size_t>(n))
    throw std::invalid_argument("cwcnn: one activation per layer expected");
  Rng rng(init_seed);
  ParamVec p;
  for (int k = 0; k <= n; ++k)
    p.add("hodge_w" + std::to_string(k),
          uniform_column(rng, cfg.profile[static_cast<size_t>(k)], 0.5, 1.5));
  const int nn = cfg.profile.back();
  p.add("readout_w", he_dense(rng, 1, nn, nn));
  p.add("readout_b", Mat::Zero(1, 1));
  p.add("out_w", he_dense(rng, 1, 1, 1));
  p.add("out_b", Mat::Zero(1, 1));
  return p;
}

ParamVec init_cwat_params(const CwAtConfig& cfg, std::uint64_t init_seed) {
  const int n = static_cast<int>(cfg.profile.size()) - 1;
  if (n < 1) throw std::invalid_argument("cwat: profile needs dimension >= 1");
  if (cfg.heads < 1) throw std::invalid_argument("cwat: heads must be >= 1");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw std::invalid_argument("cwat: dropout must lie in [0, 1)");
  Rng rng(init_seed);
  ParamVec p;
  for (int b = 0; b < 2; ++b) {
    const std::string br = "br" + std::to_string(b) + ".";
    for (int k = 1; k <= n; ++k) {
      const std::string lvl = br + "k" + std::to_string(k) + ".";
      const int nk = cfg.profile[static_cast<size_t>(k)];
      const int nprev = cfg.profile[static_cast<size_t>(k) - 1];
      for (int h = 0; h < cfg.heads; ++h) {
        const std::string hd = lvl + "h" + std::to_string(h) + ".";
        p.add(hd + "w_self", he_dense(rng, nk, nk, nk));
        p.add(hd + "w_nb", he_dense(rng, nprev, nprev, nprev));
        p.add(hd + "attn", he_dense(rng, 2 * nk, nk, 2 * nk));
      }
      p.add(lvl + "proj", stacked_identity(cfg.heads, nk));
      p.add(lvl + "ff1", he_dense(rng, nk, nk, nk));
      p.add(lvl + "ff2", he_dense(rng, nk, nk, nk));
      p.add(lvl + "ln_gain", Mat::Ones(1, nk));
      p.add(lvl + "ln_bias", Mat::Zero(1, nk));
    }
  }
  const int nn = cfg.profile.back();
  p.add("final_w", he_dense(rng, 1, nn, nn));
  p.add("final_b", Mat::Zero(1, 1));
  return p;
}

Mat feature_map_matrix(const CWComplex& cx, int k, FeatureMap fm) {
  const int nk = cx.size(k);
  if (fm == FeatureMap::Identity) return Mat::Identity(nk, nk);
  Vec deg = Vec::Zero(nk);
  if (k == 0) {
    if (cx.dimension >= 1)
      deg = cx.boundary(1).cast<double>().cwiseAbs().rowwise().sum();
  } else {
    deg = cx.boundary(k).cast<double>().cwiseAbs().colwise().sum().transpose();
  }
  Mat a = Mat::Zero(nk, nk);
  a.diagonal() = deg;
  return a;
}

Tensor hodge_laplacian_op(Tape& t, const CWComplex& cx, int k,
                          const std::vector<Tensor>& hodge_w) {
  const int n = cx.dimension;
  if (k < 0 || k > n)
    throw std::invalid_argument("hodge_laplacian_op: degree outside [0, n]");
  if (hodge_w.size() != static_cast<size_t>(n) + 1)
    throw std::invalid_argument("hodge_laplacian_op: one weight column per dimension");
  Tensor down, up;
  if (k >= 1) {
    Mat bk = cx.boundary(k).cast<double>();
    Tensor bk_c = t.constant(bk);
    Tensor bkT_c = t.constant(bk.transpose());
    Tensor pinv_prev = diag_pinv(hodge_w[static_cast<size_t>(k) - 1]);
    down = scale_cols(matmul(bkT_c, scale_rows(bk_c, pinv_prev)),
                      hodge_w[static_cast<size_t>(k)]);
  }
  if (k <= n - 1) {
    Mat bk1 = cx.boundary(k + 1).cast<double>();
    Tensor bk1_c = t.constant(bk1);
    Tensor bk1T_c = t.constant(bk1.transpose());
    Tensor pinv_k = diag_pinv(hodge_w[static_cast<size_t>(k)]);
    up = scale_rows(matmul(scale_cols(bk1_c, hodge_w[static_cast<size_t>(k) + 1]),
                           bk1T_c),
                    pinv_k);
  }
  if (down.valid() && up.valid()) return add(down, up);
  if (down.valid()) return down;
  if (up.valid()) return up;
  return t.constant(Mat::Zero(cx.size(0), cx.size(0))); // n = 0
}

Tensor cwcnn_layer(Tape& t, const CWComplex& cx, int k, const Tensor& H,
                   const std::vector<Tensor>& hodge_w, FeatureMap fm,
                   Activation act) {
  const int n = cx.dimension;
  if (k < 0 || k > n - 1)
    throw std::invalid_argument("cwcnn_layer: k must lie in [0, n-1]");
  if (H.rows() != cx.size(k) || H.cols() != cx.size(k))
    throw std::invalid_argument("cwcnn_layer: hidden state must be N_k x N_k");
  Tensor delta = hodge_laplacian_op(t, cx, k, hodge_w);
  Tensor ah = H;
  if (fm == FeatureMap::Degree) {
    Mat a = feature_map_matrix(cx, k, fm);
    ah = scale_rows(H, t.constant(a.diagonal()));
  }
  Tensor pre = conjugate(matmul(delta, ah),
                         t.constant(cx.boundary(k + 1).cast<double>()));
  return activation(pre, act);
}

namespace {

// all-ones column over real k-cells, zero on padding
Mat masked_ones(const CWComplex& cx, int k) {
  Mat x = Mat::Zero(cx.size(k), 1);
  x.topRows(cx.real(k)).setOnes();
  return x;
}

Mat rank_one_state(const CWComplex& cx, int k, int cell) {
  Mat m = Mat::Zero(cx.size(k), cx.size(k));
  m.col(cell).head(cx.real(k)).setOnes();
  return m;
}

std::vector<int> neighborhood(const CWComplex& cx, int k, int cell) {
  std::vector<int> nb;
  const IMat& b = cx.boundary(k);
  for (int r = 0; r < cx.real(k - 1); ++r)
    if (b(r, cell) != 0) nb.push_back(r);
  return nb;
}

} // namespace

std::vector<Tensor> init_attention_state(Tape& t, const CWComplex& cx) {
  std::vector<Tensor> states;
  states.reserve(static_cast<size_t>(cx.real(0)));
  for (int i = 0; i < cx.real(0); ++i)
    states.push_back(t.constant(rank_one_state(cx, 0, i)));
  return states;
}

Tensor level_seed_state(Tape& t, const CWComplex& cx, int k, int cell) {
  if (k < 0 || k > cx.dimension || cell < 0 || cell >= cx.real(k))
    throw std::invalid_argument("level_seed_state: cell outside real range");
  return t.constant(rank_one_state(cx, k, cell));
}

Tensor attention_score(Tape& t, const CWComplex& cx, int k, const Tensor& h_i,
                       const Tensor& h_j, const AttentionHead& head) {
  if (k < 1 || k > cx.dimension)
    throw std::invalid_argument("attention_score: k must lie in [1, n]");
  const int nk = cx.size(k), nprev = cx.size(k - 1);
  if (h_i.rows() != nk || h_i.cols() != nk)
    throw std::invalid_argument("attention_score: h_i must be N_k x N_k");
  if (h_j.rows() != nprev || h_j.cols() != nprev)
    throw std::invalid_argument("attention_score: h_j must be N_{k-1} x N_{k-1}");
  if (head.attn.rows() != 2 * nk || head.attn.cols() != nk)
    throw std::invalid_argument("attention_score: attn map must be 2N_k x N_k");
  Tensor left = matmul(head.w_self, h_i);
  Tensor right = conjugate(matmul(head.w_nb, h_j),
                           t.constant(cx.boundary(k).cast<double>()));
  return activation(matmul(concat_cols(left, right), head.attn),
                    Activation::LeakyRelu);
}

std::vector<Tensor> csoftmax(const std::vector<Tensor>& scores) {
  if (scores.empty())
    throw std::invalid_argument("csoftmax: no incident cells");
  Tape& t = *scores[0].tape();
  Mat mx = scores[0].value();
  for (size_t j = 1; j < scores.size(); ++j)
    mx = mx.cwiseMax(scores[j].value());
  Tensor shift = t.constant(-mx); // constant: gradient-transparent stabilizer
  std::vector<Tensor> exps;
  exps.reserve(scores.size());
  for (const Tensor& s : scores)
    exps.push_back(activation(add(s, shift), Activation::Exp));
  Tensor denom = exps[0];
  for (size_t j = 1; j < exps.size(); ++j) denom = add(denom, exps[j]);
  std::vector<Tensor> alpha;
  alpha.reserve(exps.size());
  for (const Tensor& e : exps) alpha.push_back(cdivide(e, denom));
  return alpha;
}

Tensor attention_update(Tape& t, const CWComplex& cx, int k,
                        const std::vector<Tensor>& prev_states, int cell,
                        const AttentionHead& head, Activation act,
                        AttentionDiagnostics* diag) {
  if (k < 1 || k > cx.dimension)
    throw std::invalid_argument("attention_update: k must lie in [1, n]");
  const int nk = cx.size(k);
  if (prev_states.empty()) {
    if (diag) ++diag->isolated_cells;
    return t.constant(Mat::Zero(nk, nk));
  }
  Tensor h_i = level_seed_state(t, cx, k, cell);
  Tensor bk = t.constant(cx.boundary(k).cast<double>());
  std::vector<Tensor> scores, transforms;
  scores.reserve(prev_states.size());
  transforms.reserve(prev_states.size());
  for (const Tensor& h_j : prev_states) {
    transforms.push_back(conjugate(matmul(head.w_nb, h_j), bk));
    scores.push_back(attention_score(t, cx, k, h_i, h_j, head));
  }
  std::vector<Tensor> alpha = csoftmax(scores);
  Tensor sum = matmul(alpha[0], transforms[0]);
  for (size_t j = 1; j < alpha.size(); ++j)
    sum = add(sum, matmul(alpha[j], transforms[j]));
  return activation(sum, act);
}

Tensor multihead_update(Tape& t, const CWComplex& cx, int k,
                        const std::vector<Tensor>& prev_states, int cell,
                        const std::vector<AttentionHead>& heads,
                        const Tensor& projection, Activation act,
                        AttentionDiagnostics* diag) {
  if (heads.empty())
    throw std::invalid_argument("multihead_update: need at least one head");
  const int nk = cx.size(k);
  if (projection.rows() != static_cast<int>(heads.size()) * nk ||
      projection.cols() != nk)
    throw std::invalid_argument("multihead_update: projection must be KN_k x N_k");
  std::vector<Tensor> outs;
  outs.reserve(heads.size());
  for (const AttentionHead& head : heads)
    outs.push_back(
        attention_update(t, cx, k, prev_states, cell, head, act, diag));
  return matmul(concat_cols(outs), projection);
}

namespace {

// LeakyReLU(u * m.row(row) + s) as one node; the output sign recovers the
// pre-activation sign, so the closure reads its own value instead of storing
// an intermediate
Tensor pair_score(Tape& t, const Tensor& u, const Tensor& m, int row,
                  const Tensor& s) {
  Mat v = apply_activation(u.value() * m.value().row(row) + s.value(),
                           Activation::LeakyRelu);
  if (!u.tracked() && !m.tracked() && !s.tracked())
    return t.constant(std::move(v));
  std::uint32_t ui = u.id(), mi = m.id(), si = s.id();
  std::uint32_t vi = static_cast<std::uint32_t>(t.size()); // id of this node
  return t.record(std::move(v), true, [ui, mi, si, row, vi](Tape& t,
                                                            const Mat& g) {
    Mat d = t.node_value(vi)
                .unaryExpr([](double o) { return o < 0.0 ? 0.01 : 1.0; })
                .cwiseProduct(g);
    t.accumulate(ui, d * t.node_value(mi).row(row).transpose());
    t.accumulate_block(mi, row, 0, t.node_value(ui).transpose() * d);
    t.accumulate(si, std::move(d));
  });
}

// same score for rank-one transforms: LeakyReLU(u * a.row(i) + q * b.row(j))
// with column vectors u, q
Tensor pair_score_rank1(Tape& t, const Tensor& u, const Tensor& a, int i,
                        const Tensor& q, const Tensor& b, int j) {
  Mat v = apply_activation(
      u.value() * a.value().row(i) + q.value() * b.value().row(j),
      Activation::LeakyRelu);
  if (!u.tracked() && !a.tracked() && !q.tracked() && !b.tracked())
    return t.constant(std::move(v));
  std::uint32_t ui = u.id(), ai = a.id(), qi = q.id(), bi = b.id();
  std::uint32_t vi = static_cast<std::uint32_t>(t.size()); // id of this node
  return t.record(std::move(v), true,
                  [ui, ai, qi, bi, i, j, vi](Tape& t, const Mat& g) {
                    Mat d = t.node_value(vi)
                                .unaryExpr([](double o) {
                                  return o < 0.0 ? 0.01 : 1.0;
                                })
                                .cwiseProduct(g);
                    t.accumulate(ui, d * t.node_value(ai).row(i).transpose());
                    t.accumulate_block(ai, i, 0,
                                       t.node_value(ui).transpose() * d);
                    t.accumulate(qi, d * t.node_value(bi).row(j).transpose());
                    t.accumulate_block(bi, j, 0,
                                       t.node_value(qi).transpose() * d);
                  });
}

// entrywise softmax weights, stabilized by a max shift; a pair of scores
// needs just one stable sigmoid pass
std::vector<Mat> softmax_weights(Tape& t, const std::vector<std::uint32_t>& sid) {
  std::vector<Mat> a(sid.size());
  if (sid.size() == 2) {
    a[0] = (t.node_value(sid[0]) - t.node_value(sid[1]))
               .unaryExpr([](double d) {
                 double p = 1.0 / (1.0 + std::exp(-std::abs(d)));
                 return d >= 0.0 ? p : 1.0 - p;
               });
    a[1] = Mat::Ones(a[0].rows(), a[0].cols()) - a[0];
    return a;
  }
  Mat mx = t.node_value(sid[0]);
  for (size_t j = 1; j < sid.size(); ++j) mx = mx.cwiseMax(t.node_value(sid[j]));
  a[0] = (t.node_value(sid[0]) - mx).array().exp().matrix();
  Mat denom = a[0];
  for (size_t j = 1; j < sid.size(); ++j) {
    a[j] = (t.node_value(sid[j]) - mx).array().exp().matrix();
    denom += a[j];
  }
  for (Mat& aj : a) aj = aj.cwiseQuotient(denom);
  return a;
}

// stabilized entrywise softmax over the score list fused with the sum of
// matrix products sum_j alpha_j * t_j and the update activation
Tensor attention_mix(Tape& t, const std::vector<Tensor>& scores,
                     const std::vector<Tensor>& transforms, Activation act) {
  const size_t m = scores.size();
  std::vector<std::uint32_t> sid(m), tid(m);
  bool tracked = false;
  for (size_t j = 0; j < m; ++j) {
    sid[j] = scores[j].id();
    tid[j] = transforms[j].id();
    tracked = tracked || scores[j].tracked() || transforms[j].tracked();
  }
  std::vector<Mat> a = softmax_weights(t, sid);
  Mat pre = a[0] * t.node_value(tid[0]);
  for (size_t j = 1; j < m; ++j) pre += a[j] * t.node_value(tid[j]);
  Mat out = apply_activation(pre, act);
  if (!tracked) return t.constant(std::move(out));
  return t.record(
      std::move(out), true,
      [sid = std::move(sid), tid = std::move(tid), a = std::move(a),
       pre = std::move(pre), act](Tape& t, const Mat& g) {
        Mat gs = activation_derivative(pre, act).cwiseProduct(g);
        std::vector<Mat> da(sid.size());
        Mat acc;
        for (size_t j = 0; j < sid.size(); ++j) {
          da[j] = gs * t.node_value(tid[j]).transpose();
          if (j == 0)
            acc = a[j].cwiseProduct(da[j]);
          else
            acc += a[j].cwiseProduct(da[j]);
        }
        for (size_t j = 0; j < sid.size(); ++j) {
          t.accumulate(sid[j], a[j].cwiseProduct(da[j] - acc));
          t.accumulate(tid[j], a[j].transpose() * gs);
        }
      });
}

// mix for rank-one transforms q * rows[j]: alpha_j never multiplies a full
// matrix pair, so every product stays quadratic in N_k
Tensor attention_mix_rank1(Tape& t, const std::vector<Tensor>& scores,
                           const Tensor& q, std::vector<Mat> rows,
                           Activation act) {
  const size_t m = scores.size();
  std::vector<std::uint32_t> sid(m);
  bool tracked = q.tracked();
  for (size_t j = 0; j < m; ++j) {
    sid[j] = scores[j].id();
    tracked = tracked || scores[j].tracked();
  }
  std::vector<Mat> a = softmax_weights(t, sid);
  Mat pre = (a[0] * q.value()) * rows[0];
  for (size_t j = 1; j < m; ++j) pre += (a[j] * q.value()) * rows[j];
  Mat out = apply_activation(pre, act);
  if (!tracked) return t.constant(std::move(out));
  std::uint32_t qi = q.id();
  return t.record(
      std::move(out), true,
      [sid = std::move(sid), qi, a = std::move(a), rows = std::move(rows),
       pre = std::move(pre), act](Tape& t, const Mat& g) {
        Mat gs = activation_derivative(pre, act).cwiseProduct(g);
        const Mat& qv = t.node_value(qi);
        std::vector<Mat> da(sid.size());
        Mat acc, dq;
        for (size_t j = 0; j < sid.size(); ++j) {
          Mat w = gs * rows[j].transpose();
          da[j] = w * qv.transpose();
          if (j == 0) {
            acc = a[j].cwiseProduct(da[j]);
            dq = a[j].transpose() * w;
          } else {
            acc += a[j].cwiseProduct(da[j]);
            dq += a[j].transpose() * w;
          }
        }
        for (size_t j = 0; j < sid.size(); ++j)
          t.accumulate(sid[j], a[j].cwiseProduct(da[j] - acc));
        t.accumulate(qi, std::move(dq));
      });
}

// per-level learnables of one branch
struct LevelRefs {
  std::vector<AttentionHead> heads;
  Tensor proj, ff1, ff2, ln_gain, ln_bias;
};

LevelRefs level_refs(const BoundParams& bp, int branch, int k, int heads) {
  LevelRefs refs;
  const std::string lvl =
      "br" + std::to_string(branch) + ".k" + std::to_string(k) + ".";
  for (int h = 0; h < heads; ++h) {
    const std::string hd = lvl + "h" + std::to_string(h) + ".";
    refs.heads.push_back({bp.at(hd + "w_self"), bp.at(hd + "w_nb"),
                          bp.at(hd + "attn")});
  }
  refs.proj = bp.at(lvl + "proj");
  refs.ff1 = bp.at(lvl + "ff1");
  refs.ff2 = bp.at(lvl + "ff2");
  refs.ln_gain = bp.at(lvl + "ln_gain");
  refs.ln_bias = bp.at(lvl + "ln_bias");
  return refs;
}

// States of all real k-cells stacked vertically (real_k * N_k rows). Scores
// split [X || Y] a = X a_top + Y a_bot with the rank-one self state, so the
// self term costs one outer product per cell and each neighbor transform is
// shared across the level. With seeded = true the previous level holds its
// seed states x e_j^T, so each transform collapses to q * B_k.row(j) with
// q = B_k^T W x shared across the level and prev_states is ignored.
Tensor attention_level_stacked(Tape& t, const CWComplex& cx, int k,
                               const std::vector<Tensor>& prev_states,
                               const LevelRefs& refs, const CwAtConfig& cfg,
                               const ForwardOptions& opt, const Tensor& bk_const,
                               const Tensor& xk_const, const Tensor& xprev_const,
                               bool seeded) {
  const int nk = cx.size(k);
  const int cells = cx.real(k);
  const size_t prevs = seeded ? static_cast<size_t>(cx.real(k - 1))
                              : prev_states.size();
  std::vector<std::vector<int>> nbs(static_cast<size_t>(cells));
  std::vector<char> used(prevs, 0);
  for (int i = 0; i < cells; ++i) {
    nbs[static_cast<size_t>(i)] = neighborhood(cx, k, i);
    for (int j : nbs[static_cast<size_t>(i)]) used[static_cast<size_t>(j)] = 1;
  }

  Tensor bkT_const = t.constant(bk_const.value().transpose());
  std::vector<Mat> brow(prevs);
  if (seeded)
    for (size_t j = 0; j < prevs; ++j)
      if (used[j]) brow[j] = bk_const.value().row(static_cast<int>(j));
  std::vector<Tensor> head_stacks;
  head_stacks.reserve(refs.heads.size());
  for (const AttentionHead& head : refs.heads) {
    Tensor a_top = slice_rows(head.attn, 0, nk);
    Tensor a_bot = slice_rows(head.attn, nk, nk);
    Tensor u = matmul(head.w_self, xk_const);
    // B_k^T (W h_j) B_k reassociated so the narrow factor applies first
    Tensor wb = matmul(bkT_const, head.w_nb);
    Tensor q, ba;
    std::vector<Tensor> transform(seeded ? 0 : prevs);
    std::vector<Tensor> scored(seeded ? 0 : prevs);
    if (seeded) {
      q = matmul(wb, xprev_const);
      ba = matmul(bk_const, a_bot);
    } else {
      for (size_t j = 0; j < prevs; ++j) {
        if (!used[j]) continue;
        transform[j] = matmul(wb, matmul(prev_states[j], bk_const));
        scored[j] = matmul(transform[j], a_bot);
      }
    }
    std::vector<Tensor> outs;
    outs.reserve(static_cast<size_t>(cells));
    for (int i = 0; i < cells; ++i) {
      const std::vector<int>& nb = nbs[static_cast<size_t>(i)];
      if (nb.empty()) {
        if (opt.diag) ++opt.diag->isolated_cells;
        outs.push_back(t.constant(Mat::Zero(nk, nk)));
        continue;
      }
      std::vector<Tensor> scores;
      scores.reserve(nb.size());
      if (seeded) {
        std::vector<Mat> rows;
        rows.reserve(nb.size());
        for (int j : nb) {
          scores.push_back(pair_score_rank1(t, u, a_top, i, q, ba, j));
          rows.push_back(brow[static_cast<size_t>(j)]);
        }
        outs.push_back(attention_mix_rank1(t, scores, q, std::move(rows),
                                           cfg.update_activation));
      } else {
        std::vector<Tensor> transforms;
        transforms.reserve(nb.size());
        for (int j : nb) {
          scores.push_back(
              pair_score(t, u, a_top, i, scored[static_cast<size_t>(j)]));
          transforms.push_back(transform[static_cast<size_t>(j)]);
        }
        outs.push_back(
            attention_mix(t, scores, transforms, cfg.update_activation));
      }
    }
    head_stacks.push_back(concat_rows(outs));
  }

  Tensor x = matmul(concat_cols(head_stacks), refs.proj);
  if (opt.train_mode && cfg.dropout > 0.0) {
    if (!opt.dropout_rng)
      throw std::invalid_argument("cwat_forward: train mode needs a dropout rng");
    x = hadamard(x, t.constant(dropout_mask(*opt.dropout_rng, x.rows(),
                                            x.cols(), cfg.dropout)));
  }
  x = matmul(activation(matmul(x, refs.ff1), Activation::Gelu), refs.ff2);
  x = layer_norm(x, refs.ln_gain, refs.ln_bias, cfg.layer_norm_eps);
  // padding stays silent: zero rows/cols survive the dense maps above only
  // until here, where the real-cell mask restores them
  Mat block = Mat::Zero(nk, nk);
  block.topLeftCorner(cx.real(k), cx.real(k)).setOnes();
  Mat mask(cells * nk, nk);
  for (int i = 0; i < cells; ++i) mask.middleRows(i * nk, nk) = block;
  return hadamard(x, t.constant(std::move(mask)));
}

} // namespace

Mat dropout_mask(Rng& rng, int rows, int cols, double p) {
  const double keep_scale = 1.0 / (1.0 - p);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = rng.bernoulli(p) ? 0.0 : keep_scale;
  return m;
}

Tensor cwcnn_forward(Tape& t, const CWComplex& cx, const CwCnnConfig& cfg,
                     const BoundParams& bp) {
  const int n = cx.dimension;
  if (n < 1) throw std::invalid_argument("cwcnn_forward: dimension must be >= 1");
  if (cfg.profile.size() != static_cast<size_t>(n) + 1 || cx.sizes != cfg.profile)
    throw std::invalid_argument("cwcnn_forward: complex does not match profile");
  if (cfg.activations.size() != static_cast<size_t>(n))
    throw std::invalid_argument("cwcnn_forward: one activation per layer expected");
  std::vector<Tensor> hodge_w;
  hodge_w.reserve(static_cast<size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) hodge_w.push_back(bp.at("hodge_w" + std::to_string(k)));

  Mat h0 = Mat::Zero(cx.size(0), cx.size(0));
  h0.diagonal().head(cx.real(0)).setOnes();
  Tensor h = t.constant(std::move(h0));
  for (int k = 0; k < n; ++k)
    h = cwcnn_layer(t, cx, k, h, hodge_w, cfg.feature_map,
                    cfg.activations[static_cast<size_t>(k)]);
  // averages the real rows of the top state; padding rows stay excluded
  Tensor pooled =
      row_mean(transpose(slice_rows(h, 0, std::max(1, cx.real(n)))));
  Tensor hidden = activation(add(matmul(bp.at("readout_w"), pooled),
                                 bp.at("readout_b")),
                             cfg.readout_activation);
  return add(matmul(bp.at("out_w"), hidden), bp.at("out_b"));
}

Tensor cwat_forward(Tape& t, const CWComplex& cx, const CwAtConfig& cfg,
                    const BoundParams& bp, const ForwardOptions& opt) {
  const int n = cx.dimension;
  if (n < 1) throw std::invalid_argument("cwat_forward: dimension must be >= 1");
  if (cfg.profile.size() != static_cast<size_t>(n) + 1 || cx.sizes != cfg.profile)
    throw std::invalid_argument("cwat_forward: complex does not match profile");
  if (cfg.heads < 1) throw std::invalid_argument("cwat_forward: heads must be >= 1");

  std::vector<Tensor> bk_consts, xk_consts;
  xk_consts.push_back(t.constant(masked_ones(cx, 0)));
  for (int k = 1; k <= n; ++k) {
    bk_consts.push_back(t.constant(cx.boundary(k).cast<double>()));
    xk_consts.push_back(t.constant(masked_ones(cx, k)));
  }

  Tensor combined;
  for (int b = 0; b < 2; ++b) {
    std::vector<Tensor> states; // level 1 reads the seeds through the fused path
    Tensor stacked;
    for (int k = 1; k <= n; ++k) {
      stacked = attention_level_stacked(
          t, cx, k, states, level_refs(bp, b, k, cfg.heads), cfg, opt,
          bk_consts[static_cast<size_t>(k) - 1],
          xk_consts[static_cast<size_t>(k)],
          xk_consts[static_cast<size_t>(k) - 1], k == 1);
      if (k < n) {
        states.clear();
        const int nk = cx.size(k);
        for (int i = 0; i < cx.real(k); ++i)
          states.push_back(slice_rows(stacked, i * nk, nk));
      }
    }
    const int nn = cx.size(n);
    const int top = cx.real(n);
    Mat avg(nn, top * nn);
    for (int i = 0; i < top; ++i)
      avg.middleCols(i * nn, nn) = Mat::Identity(nn, nn) / top;
    Tensor pooled = row_mean(matmul(t.constant(std::move(avg)), stacked));
    combined = b == 0 ? pooled : add(combined, pooled);
  }
  Tensor s = activation(combined, Activation::Selu);
  return add(matmul(bp.at("final_w"), s), bp.at("final_b"));
}

} // namespace cwnet
