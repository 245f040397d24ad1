#ifndef CONCEPT_FORGE_KMEANS_HPP
#define CONCEPT_FORGE_KMEANS_HPP

#include "concept_forge/types.hpp"
#include "concept_forge/ward.hpp"

#include <vector>

namespace concept_forge {

inline constexpr int kOutlier = -1;
inline constexpr int kDropped = -2;

struct ClusterResult {
  /// Nearest-centroid index per point after Lloyd, before any filtering.
  std::vector<int> assignment;
  /// `assignment`, with filtered points replaced by kOutlier or kDropped.
  std::vector<int> labels;
  RowMatrix centroids;  // k x d
  int k_requested = 0;
  /// Cluster ids that passed the size filter, ascending.
  std::vector<int> surviving;
  /// Retained members per cluster id (empty for dropped clusters).
  std::vector<std::vector<Index>> members;
  /// Within-cluster SSE after every assignment step.
  std::vector<double> sse_history;
  int iterations = 0;

  int clusters_surviving() const { return static_cast<int>(surviving.size()); }
};

inline constexpr int kMaxLloydIterations = 300;

/// Lloyd's algorithm from the given initial centroids.
///
/// Points go to the nearest centroid (ties to the lowest index); centroids
/// become member means. Stops when assignments repeat or after `max_iter`
/// updates. An empty cluster is reseeded with the point farthest from its
/// current centroid.
ClusterResult kmeans_lloyd(const RowMatrix& X, const RowMatrix& init, int max_iter = kMaxLloydIterations);

/// Marks members farther than mean + tau * stddev from their centroid as
/// outliers (population stddev over the cluster's member distances), then
/// drops clusters left with fewer than `min_cluster_size` members.
/// tau = +inf disables outlier marking.
ClusterResult remove_outliers(ClusterResult res, const RowMatrix& X, double tau, int min_cluster_size);

/// Row means of X grouped by partition label; row c is the mean of cluster c.
RowMatrix partition_means(const RowMatrix& X, const Partition& p);

/// Sum of squared distances from each point to its assigned centroid.
double within_cluster_sse(const RowMatrix& X, const RowMatrix& centroids, const std::vector<int>& assignment);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_KMEANS_HPP
