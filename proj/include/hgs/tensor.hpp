#pragma once

#include <Eigen/Dense>

namespace hgs {

template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = MatrixT<float>;

}  // namespace hgs
