#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cwnet/types.hpp"

namespace cwnet {

class Tape;

// Handle into a Tape; cheap to copy, invalidated by Tape::clear.
class Tensor {
 public:
  Tensor() = default;
  bool valid() const { return tape_ != nullptr; }
  int rows() const;
  int cols() const;
  const Mat& value() const;
  const Mat& grad() const; // zero-sized until backward touches this node
  bool tracked() const;    // participates in gradient flow
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* t, std::uint32_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Append-only record of a forward computation. Node ids grow monotonically,
// so iterating ids in reverse is a valid reverse-topological order.
class Tape {
 public:
  using Pull = std::function<void(Tape&, const Mat&)>;

  Tensor leaf(Mat value);     // tracked input (parameter)
  Tensor constant(Mat value); // untracked input

  // Reverse sweep from a 1x1 loss node. Clears previous gradients, seeds the
  // loss with `seed`, and pulls gradients back to every tracked node.
  void backward(const Tensor& loss, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }
  void clear(); // drops all nodes, keeps capacity
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // construction API used by the op functions
  Tensor record(Mat value, bool tracked, Pull pull);
  const Mat& node_value(std::uint32_t id) const { return nodes_[id].value; }
  const Mat& node_grad(std::uint32_t id) const { return nodes_[id].grad; }
  bool node_tracked(std::uint32_t id) const { return nodes_[id].tracked; }

  template <typename D>
  void accumulate(std::uint32_t id, const Eigen::MatrixBase<D>& g) {
    Node& n = nodes_[id];
    if (!n.tracked) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  // adds g into the sub-block of id's gradient at (r0, c0)
  template <typename D>
  void accumulate_block(std::uint32_t id, int r0, int c0,
                        const Eigen::MatrixBase<D>& g) {
    Node& n = nodes_[id];
    if (!n.tracked) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad.block(r0, c0, g.rows(), g.cols()) += g;
  }

 private:
  struct Node {
    Mat value;
    Mat grad; // allocated lazily during backward
    bool tracked = false;
    Pull pull; // empty for leaves and constants
  };
  std::vector<Node> nodes_;
};

inline int Tensor::rows() const { return static_cast<int>(value().rows()); }
inline int Tensor::cols() const { return static_cast<int>(value().cols()); }
inline const Mat& Tensor::value() const { return tape_->node_value(id_); }
inline const Mat& Tensor::grad() const { return tape_->node_grad(id_); }
inline bool Tensor::tracked() const { return tape_->node_tracked(id_); }

enum class Activation { Identity, LeakyRelu, Gelu, Selu, Exp };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

// elementwise forward/derivative on plain matrices (shared with the ops)
Mat apply_activation(const Mat& x, Activation a);
Mat activation_derivative(const Mat& x, Activation a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
// elementwise a / b; throws std::domain_error when any |b_ij| < 1e-300
Tensor cdivide(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int start, int rows);
Tensor row_mean(const Tensor& a); // NxM -> Nx1
Tensor sum_all(const Tensor& a);  // NxM -> 1x1
Tensor activation(const Tensor& a, Activation kind);
// elementwise reciprocal where |x| > 1e-12, zero elsewhere
Tensor diag_pinv(const Tensor& a);
Tensor scale_rows(const Tensor& m, const Tensor& w); // diag(w) * m, w Nx1
Tensor scale_cols(const Tensor& m, const Tensor& w); // m * diag(w), w Mx1
// basis^T * m * basis for an untracked basis; single node instead of three
Tensor conjugate(const Tensor& m, const Tensor& basis);
// per-row normalization with learned gain/bias (1xD each)
Tensor layer_norm(const Tensor& m, const Tensor& gain, const Tensor& bias,
                  double eps);

} // namespace cwnet
