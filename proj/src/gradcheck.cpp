#include "cwnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cwnet {

GradCheckReport grad_check(const LossFn& f, const std::vector<Mat>& inputs,
                           double step) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const Mat& m : inputs) leaves.push_back(tape.leaf(m));
  Tensor loss = f(tape, leaves);
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("grad_check: loss must be 1x1");
  tape.backward(loss);

  std::vector<Mat> analytic;
  analytic.reserve(leaves.size());
  for (const Tensor& lf : leaves) {
    Mat g = lf.grad();
    if (g.size() == 0) g = Mat::Zero(lf.rows(), lf.cols());
    analytic.push_back(std::move(g));
  }

  GradCheckReport rep;
  std::vector<Mat> work = inputs;
  Tape fd;
  auto eval = [&]() {
    fd.clear();
    std::vector<Tensor> bound;
    bound.reserve(work.size());
    for (const Mat& m : work) bound.push_back(fd.constant(m));
    return f(fd, bound).value()(0, 0);
  };

  for (std::size_t p = 0; p < work.size(); ++p)
    for (int i = 0; i < work[p].rows(); ++i)
      for (int j = 0; j < work[p].cols(); ++j) {
        double saved = work[p](i, j);
        work[p](i, j) = saved + step;
        double fp = eval();
        work[p](i, j) = saved - step;
        double fm = eval();
        work[p](i, j) = saved;
        double numeric = (fp - fm) / (2.0 * step);
        double a = analytic[p](i, j);
        double rel = std::abs(a - numeric) /
                     std::max({1.0, std::abs(a), std::abs(numeric)});
        ++rep.coords;
        if (rel > rep.max_rel_err) {
          rep.max_rel_err = rel;
          rep.worst_input = p;
          rep.worst_row = i;
          rep.worst_col = j;
          rep.analytic = a;
          rep.numeric = numeric;
        }
      }
  return rep;
}

} // namespace cwnet
