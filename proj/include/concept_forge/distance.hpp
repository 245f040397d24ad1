#ifndef CONCEPT_FORGE_DISTANCE_HPP
#define CONCEPT_FORGE_DISTANCE_HPP

#include "concept_forge/types.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace concept_forge {

/// Euclidean distance between two rows, summed left to right so the result
/// does not depend on how rows are split across workers.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar row_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  Scalar sum(0);
  for (Index k = 0; k < a.size(); ++k) {
    const Scalar diff = a(k) - b(k);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

/// Symmetric (n, n) matrix of Euclidean distances between the rows of X.
///
/// Rows are split into contiguous blocks across `workers` threads; every
/// entry is computed by the same scalar loop, so the output is bitwise
/// independent of the worker count.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> pairwise_euclidean(
    const Eigen::MatrixBase<Derived>& X, int workers = 1) {
  using Scalar = typename Derived::Scalar;
  const Index n = X.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> D = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  const auto fill_rows = [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      for (Index j = i + 1; j < n; ++j) D(i, j) = row_distance(X.row(i), X.row(j));
    }
  };

  const Index threads = std::clamp<Index>(workers, 1, std::max<Index>(n, 1));
  if (threads == 1) {
    fill_rows(0, n);
  } else {
    std::vector<std::thread> pool;
    const Index block = (n + threads - 1) / threads;
    for (Index begin = 0; begin < n; begin += block) {
      pool.emplace_back(fill_rows, begin, std::min(n, begin + block));
    }
    for (auto& t : pool) t.join();
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < i; ++j) D(i, j) = D(j, i);
  }
  return D;
}

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_DISTANCE_HPP
