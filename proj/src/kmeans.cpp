#include "concept_forge/kmeans.hpp"

#include <cmath>
#include <limits>

namespace concept_forge {

namespace {

double squared_distance(const RowMatrix& X, Index i, const RowMatrix& C, Index c) {
  double sum = 0.0;
  for (Index k = 0; k < X.cols(); ++k) {
    const double diff = X(i, k) - C(c, k);
    sum += diff * diff;
  }
  return sum;
}

std::vector<int> assign(const RowMatrix& X, const RowMatrix& C) {
  std::vector<int> labels(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < C.rows(); ++c) {
      const double d = squared_distance(X, i, C, c);
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
  }
  return labels;
}

RowMatrix update_centroids(const RowMatrix& X, std::vector<int>& labels, const RowMatrix& previous, bool& reseeded) {
  reseeded = false;
  const Index k = previous.rows();
  RowMatrix C = RowMatrix::Zero(k, X.cols());
  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < X.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    C.row(c) += X.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) C.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  for (Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    // reseed with the point farthest from its own centroid
    Index far = 0;
    double far_d = -1.0;
    for (Index i = 0; i < X.rows(); ++i) {
      const int own = labels[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(own)] <= 1) continue;
      const double d = squared_distance(X, i, C, own);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far_d < 0.0) continue;
    --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
    labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
    counts[static_cast<std::size_t>(c)] = 1;
    C.row(c) = X.row(far);
    reseeded = true;
  }
  return C;
}

}  // namespace

double within_cluster_sse(const RowMatrix& X, const RowMatrix& centroids, const std::vector<int>& assignment) {
  double sse = 0.0;
  for (Index i = 0; i < X.rows(); ++i) sse += squared_distance(X, i, centroids, assignment[static_cast<std::size_t>(i)]);
  return sse;
}

ClusterResult kmeans_lloyd(const RowMatrix& X, const RowMatrix& init, int max_iter) {
  const Index k = init.rows();
  if (k < 1) throw InputError("kmeans_lloyd needs k >= 1");
  if (k > X.rows()) throw InputError("kmeans_lloyd: k (" + std::to_string(k) + ") exceeds point count (" +
                                     std::to_string(X.rows()) + ")");
  if (init.cols() != X.cols()) throw InputError("kmeans_lloyd: init width does not match data");

  ClusterResult res;
  res.k_requested = static_cast<int>(k);
  res.centroids = init;
  std::vector<int> labels = assign(X, res.centroids);
  res.sse_history.push_back(within_cluster_sse(X, res.centroids, labels));

  while (res.iterations < max_iter) {
    ++res.iterations;
    bool reseeded = false;
    res.centroids = update_centroids(X, labels, res.centroids, reseeded);
    std::vector<int> next = assign(X, res.centroids);
    res.sse_history.push_back(within_cluster_sse(X, res.centroids, next));
    const bool converged = !reseeded && next == labels;
    labels = std::move(next);
    if (converged) break;
  }

  res.assignment = labels;
  res.labels = labels;
  res.members.assign(static_cast<std::size_t>(k), {});
  for (Index i = 0; i < X.rows(); ++i) res.members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  for (int c = 0; c < static_cast<int>(k); ++c) {
    if (!res.members[static_cast<std::size_t>(c)].empty()) res.surviving.push_back(c);
  }
  return res;
}

ClusterResult remove_outliers(ClusterResult res, const RowMatrix& X, double tau, int min_cluster_size) {
  if (!(tau > 0.0)) throw InputError("tau must be positive");
  if (min_cluster_size < 1) throw InputError("min_cluster_size must be at least 1");

  const auto k = static_cast<std::size_t>(res.k_requested);
  res.labels = res.assignment;
  res.members.assign(k, {});
  res.surviving.clear();

  std::vector<std::vector<Index>> assigned(k);
  for (Index i = 0; i < X.rows(); ++i) assigned[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])].push_back(i);

  for (std::size_t c = 0; c < k; ++c) {
    const auto& pts = assigned[c];
    if (pts.empty()) continue;
    std::vector<double> dist;
    dist.reserve(pts.size());
    for (const Index i : pts) dist.push_back(std::sqrt(squared_distance(X, i, res.centroids, static_cast<Index>(c))));

    std::vector<Index> kept;
    if (std::isinf(tau)) {
      kept = pts;
    } else {
      double mean = 0.0;
      for (const double d : dist) mean += d;
      mean /= static_cast<double>(dist.size());
      double var = 0.0;
      for (const double d : dist) var += (d - mean) * (d - mean);
      const double sigma = std::sqrt(var / static_cast<double>(dist.size()));
      // rounding slack so equidistant members are never flagged
      const double limit = mean + tau * sigma + 1e-12 * mean;
      for (std::size_t m = 0; m < pts.size(); ++m) {
        if (dist[m] > limit) {
          res.labels[static_cast<std::size_t>(pts[m])] = kOutlier;
        } else {
          kept.push_back(pts[m]);
        }
      }
    }

    if (static_cast<int>(kept.size()) < min_cluster_size) {
      for (const Index i : kept) res.labels[static_cast<std::size_t>(i)] = kDropped;
    } else {
      res.members[c] = std::move(kept);
      res.surviving.push_back(static_cast<int>(c));
    }
  }
  return res;
}

RowMatrix partition_means(const RowMatrix& X, const Partition& p) {
  RowMatrix means = RowMatrix::Zero(p.count, X.cols());
  std::vector<Index> counts(static_cast<std::size_t>(p.count), 0);
  for (Index i = 0; i < X.rows(); ++i) {
    const int c = p.labels[static_cast<std::size_t>(i)];
    means.row(c) += X.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (Index c = 0; c < p.count; ++c) means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  return means;
}

}  // namespace concept_forge
