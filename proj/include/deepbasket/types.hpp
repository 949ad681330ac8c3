#pragma once

#include <Eigen/Dense>

namespace deepbasket {

// m x n0 batch of network inputs, one sample per row. Row-major so that a
// dataset's flat record buffer maps onto it without copying.
using InputBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using InputBatchF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace deepbasket
