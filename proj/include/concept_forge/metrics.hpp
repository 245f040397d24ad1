#ifndef CONCEPT_FORGE_METRICS_HPP
#define CONCEPT_FORGE_METRICS_HPP

#include "concept_forge/activation_store.hpp"
#include "concept_forge/types.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <optional>
#include <vector>

namespace concept_forge {

/// Per-member comparison of a concept direction against a neuron axis.
struct ProjectionSet {
  Vector onto_concept;
  Vector onto_neuron;
  Vector cosine_concept;
  Vector cosine_neuron;
};

inline constexpr double kUnitTolerance = 1e-9;

/// Projections and cosines of each row of X onto the unit vector v and onto
/// the basis direction e_neuron. Zero rows get cosine 0.
template <typename Derived, typename VDerived>
ProjectionSet projections(const Eigen::MatrixBase<Derived>& X, const Eigen::MatrixBase<VDerived>& v, Index neuron) {
  if (v.size() != X.cols()) throw InputError("projections: direction width does not match data");
  if (std::abs(v.norm() - 1.0) > kUnitTolerance) throw InputError("projections: direction must be unit norm");
  if (neuron < 0 || neuron >= X.cols()) throw InputError("projections: neuron out of range");

  const Index m = X.rows();
  ProjectionSet out{Vector(m), Vector(m), Vector(m), Vector(m)};
  for (Index i = 0; i < m; ++i) {
    const double norm = X.row(i).norm();
    out.onto_concept(i) = X.row(i).dot(v.transpose());
    out.onto_neuron(i) = X(i, neuron);
    out.cosine_concept(i) = norm > 0.0 ? out.onto_concept(i) / norm : 0.0;
    out.cosine_neuron(i) = norm > 0.0 ? out.onto_neuron(i) / norm : 0.0;
  }
  return out;
}

/// Coordinates of the centred rows of X on their top two right singular
/// directions. Each direction is signed so its largest-magnitude component
/// (first one on ties) is positive. Rank-deficient inputs get zero columns.
template <typename Derived>
Matrix pca_2d(const Eigen::MatrixBase<Derived>& X) {
  if (X.rows() < 2) throw InputError("pca_2d needs at least two points");
  const Matrix centred = X.rowwise() - X.colwise().mean();
  const Eigen::JacobiSVD<Matrix> svd(centred, Eigen::ComputeThinV);
  const Matrix& V = svd.matrixV();

  Matrix coords = Matrix::Zero(X.rows(), 2);
  for (Index k = 0; k < std::min<Index>(2, V.cols()); ++k) {
    if (svd.singularValues()(k) == 0.0) break;
    Vector dir = V.col(k);
    Index arg = 0;
    for (Index j = 1; j < dir.size(); ++j) {
      if (std::abs(dir(j)) > std::abs(dir(arg))) arg = j;
    }
    if (dir(arg) < 0.0) dir = -dir;
    coords.col(k) = centred * dir;
  }
  return coords;
}

struct DistanceSummary {
  Matrix full;
  /// Retained points only, grouped by cluster id then by position.
  Matrix retained;
  std::vector<Index> retained_order;
  /// Mean over unordered pairs; empty when no such pair exists.
  std::optional<double> mean_intra;
  std::optional<double> mean_inter;
};

/// `labels[i] < 0` marks point i as not retained.
DistanceSummary distance_summary(const Matrix& full_distances, const std::vector<int>& labels);

struct ProjectionRanking {
  std::vector<Index> rows;
  std::vector<double> scores;
};

/// Top-K store rows by inner product with v; ties go to the lower row.
ProjectionRanking max_projecting(const ActivationStore& store, const Vector& v, Index top_k);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_METRICS_HPP
