#pragma once

#include <functional>
#include <vector>

#include "cwnet/tape.hpp"
#include "cwnet/types.hpp"

namespace cwnet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_input = 0;
  int worst_row = 0;
  int worst_col = 0;
  double analytic = 0.0; // at the worst coordinate
  double numeric = 0.0;
  std::size_t coords = 0;
  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Builds a 1x1 loss from freshly bound inputs. Called repeatedly, so it must
// be deterministic in the input values (fix any masks or noise outside).
using LossFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Central differences over every coordinate of every input, compared against
// one reverse sweep; rel err = |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const LossFn& f, const std::vector<Mat>& inputs,
                           double step = 1e-5);

} // namespace cwnet
