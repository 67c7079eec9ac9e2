#pragma once

#include <Eigen/Dense>

namespace cwnet {

// Row-major storage so flat buffers, serialization and (i,j) iteration agree.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;

} // namespace cwnet
