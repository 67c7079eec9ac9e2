#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwnet/complex.hpp"
#include "cwnet/rng.hpp"
#include "cwnet/tape.hpp"

namespace cwnet {

// Named parameter collection; add order is the canonical order for
// initialization draws, gradient flattening and serialization.
struct ParamVec {
  std::vector<std::string> names;
  std::vector<Mat> values;

  int add(std::string name, Mat value);
  int index_of(const std::string& name) const; // -1 when absent
  const Mat& at(const std::string& name) const;
  Mat& at(const std::string& name);
  long scalar_count() const;
  int count() const { return static_cast<int>(values.size()); }

 private:
  std::vector<std::pair<std::string, int>> index_; // sorted by name
};

bool operator==(const ParamVec& a, const ParamVec& b);

// parameters bound onto a tape, aligned with ParamVec order
struct BoundParams {
  const ParamVec* params = nullptr;
  std::vector<Tensor> leaves;
  const Tensor& at(const std::string& name) const;
};

BoundParams bind_leaves(Tape& t, const ParamVec& p);    // tracked
BoundParams bind_constants(Tape& t, const ParamVec& p); // frozen (eval, FD)

enum class FeatureMap { Identity, Degree };

FeatureMap feature_map_from_name(const std::string& name);

struct CwCnnConfig {
  std::vector<int> profile;            // padded N_0..N_n
  std::vector<Activation> activations; // per layer k = 0..n-1
  Activation readout_activation = Activation::Gelu;
  FeatureMap feature_map = FeatureMap::Identity;
};
CwCnnConfig default_cwcnn_config(std::vector<int> profile);

struct CwAtConfig {
  std::vector<int> profile;
  int heads = 2;
  double dropout = 0.1;
  Activation update_activation = Activation::LeakyRelu;
  double layer_norm_eps = 1e-5;
};
CwAtConfig default_cwat_config(std::vector<int> profile);

ParamVec init_cwcnn_params(const CwCnnConfig& cfg, std::uint64_t init_seed);
ParamVec init_cwat_params(const CwAtConfig& cfg, std::uint64_t init_seed);

// learnables of one attention head at one level
struct AttentionHead {
  Tensor w_self; // N_k x N_k
  Tensor w_nb;   // N_{k-1} x N_{k-1}
  Tensor attn;   // 2N_k x N_k
};

struct AttentionDiagnostics {
  long isolated_cells = 0; // empty neighborhoods replaced by zero states
};

// constant per-dimension feature map A_k
Mat feature_map_matrix(const CWComplex& cx, int k, FeatureMap fm);

// Delta_k assembled on the tape from the diagonal weight leaves (one Nx1
// column per dimension), matching hodge::hodge_laplacian at equal values
Tensor hodge_laplacian_op(Tape& t, const CWComplex& cx, int k,
                          const std::vector<Tensor>& hodge_w);

// sigma(B_{k+1}^T (Delta_k A_k H) B_{k+1}); 0 <= k <= n-1
Tensor cwcnn_layer(Tape& t, const CWComplex& cx, int k, const Tensor& H,
                   const std::vector<Tensor>& hodge_w, FeatureMap fm,
                   Activation act);

// rank-one starting states x_0 1_i^T, one per real 0-cell (untracked)
std::vector<Tensor> init_attention_state(Tape& t, const CWComplex& cx);

// the analogous rank-one seed at level k for the self term of the scores
Tensor level_seed_state(Tape& t, const CWComplex& cx, int k, int cell);

// LeakyReLU([W_k h_i || B_k^T W_{k-1} h_j B_k] a)
Tensor attention_score(Tape& t, const CWComplex& cx, int k, const Tensor& h_i,
                       const Tensor& h_j, const AttentionHead& head);

// entrywise exp over the neighborhood divided by the entrywise sum, with a
// gradient-transparent max shift; throws std::invalid_argument when empty
std::vector<Tensor> csoftmax(const std::vector<Tensor>& scores);

// sigma(sum_j alpha_j (B_k^T W_{k-1} h_j B_k)), alpha matrix-multiplied;
// prev_states lists the states of the neighborhood explicitly, `cell` only
// seeds the self term; empty neighborhood yields a zero state and bumps diag
Tensor attention_update(Tape& t, const CWComplex& cx, int k,
                        const std::vector<Tensor>& prev_states, int cell,
                        const AttentionHead& head, Activation act,
                        AttentionDiagnostics* diag = nullptr);

// concat of K head updates restored to N_k x N_k by the projection
Tensor multihead_update(Tape& t, const CWComplex& cx, int k,
                        const std::vector<Tensor>& prev_states, int cell,
                        const std::vector<AttentionHead>& heads,
                        const Tensor& projection, Activation act,
                        AttentionDiagnostics* diag = nullptr);

struct ForwardOptions {
  bool train_mode = false;
  Rng* dropout_rng = nullptr; // consulted only in train mode with dropout > 0
  AttentionDiagnostics* diag = nullptr;
};

// inverted dropout mask: entries 0 with probability p, else 1/(1-p)
Mat dropout_mask(Rng& rng, int rows, int cols, double p);

Tensor cwcnn_forward(Tape& t, const CWComplex& cx, const CwCnnConfig& cfg,
                     const BoundParams& bp);
Tensor cwat_forward(Tape& t, const CWComplex& cx, const CwAtConfig& cfg,
                    const BoundParams& bp, const ForwardOptions& opt = {});

} // namespace cwnet
