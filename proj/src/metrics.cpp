#include "concept_forge/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace concept_forge {

DistanceSummary distance_summary(const Matrix& full_distances, const std::vector<int>& labels) {
  if (full_distances.rows() != full_distances.cols() || static_cast<std::size_t>(full_distances.rows()) != labels.size()) {
    throw InputError("distance_summary: labels do not cover the distance matrix");
  }
  DistanceSummary out;
  out.full = full_distances;

  for (Index i = 0; i < full_distances.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] >= 0) out.retained_order.push_back(i);
  }
  std::stable_sort(out.retained_order.begin(), out.retained_order.end(), [&](Index a, Index b) {
    return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
  });

  const auto r = static_cast<Index>(out.retained_order.size());
  out.retained.resize(r, r);
  double intra = 0.0, inter = 0.0;
  long intra_pairs = 0, inter_pairs = 0;
  for (Index a = 0; a < r; ++a) {
    const Index i = out.retained_order[static_cast<std::size_t>(a)];
    for (Index b = 0; b < r; ++b) {
      const Index j = out.retained_order[static_cast<std::size_t>(b)];
      out.retained(a, b) = full_distances(i, j);
      if (b <= a) continue;
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        intra += full_distances(i, j);
        ++intra_pairs;
      } else {
        inter += full_distances(i, j);
        ++inter_pairs;
      }
    }
  }
  if (intra_pairs > 0) out.mean_intra = intra / static_cast<double>(intra_pairs);
  if (inter_pairs > 0) out.mean_inter = inter / static_cast<double>(inter_pairs);
  return out;
}

ProjectionRanking max_projecting(const ActivationStore& store, const Vector& v, Index top_k) {
  if (v.size() != store.dim()) throw InputError("max_projecting: direction width does not match store");
  if (top_k < 0 || top_k > store.rows()) throw InputError("max_projecting: K must be in [0, M]");
  const Vector scores = store.data() * v;
  std::vector<Index> order(static_cast<std::size_t>(store.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + top_k, order.end(), [&](Index a, Index b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  ProjectionRanking out;
  out.rows.assign(order.begin(), order.begin() + top_k);
  for (const Index r : out.rows) out.scores.push_back(scores(r));
  return out;
}

}  // namespace concept_forge
