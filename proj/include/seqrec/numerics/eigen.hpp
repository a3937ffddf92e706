#pragma once

#include <Eigen/Core>

#include "seqrec/numerics/memory.hpp"

namespace seqrec::num {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline MatrixMap as_matrix(Real* p, std::size_t rows, std::size_t cols) {
  return MatrixMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline ConstMatrixMap as_matrix(const Real* p, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace seqrec::num
