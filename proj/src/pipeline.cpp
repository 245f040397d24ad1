#include "concept_forge/pipeline.hpp"

#include "concept_forge/distance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace concept_forge {

NeuronSelection select_top_n(const ActivationStore& store, Index neuron, Index top_n) {
  if (neuron < 0 || neuron >= store.dim()) {
    throw InputError("neuron " + std::to_string(neuron) + " out of range [0, " + std::to_string(store.dim()) + ")");
  }
  if (top_n < 1 || top_n > store.rows()) {
    throw InputError("top_n must be in [1, " + std::to_string(store.rows()) + "], got " + std::to_string(top_n));
  }
  const auto column = store.data().col(neuron);
  std::vector<Index> order(static_cast<std::size_t>(store.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + top_n, order.end(), [&](Index a, Index b) {
    if (column(a) != column(b)) return column(a) > column(b);
    return a < b;
  });

  NeuronSelection sel;
  sel.neuron = neuron;
  sel.rows.assign(order.begin(), order.begin() + top_n);
  for (const Index r : sel.rows) sel.activations.push_back(column(r));
  return sel;
}

void validate(const DiscoveryParams& params) {
  if (params.top_n < 2) throw InputError("top_n: need at least 2 images to cluster");
  if (!(params.d_max > 0.0)) throw InputError("d_max: must be positive");
  if (!(params.tau > 0.0)) throw InputError("tau: must be positive");
  if (params.min_cluster_size < 1) throw InputError("min_cluster_size: must be at least 1");
}

std::shared_ptr<const PreparedNeuron> prepare_neuron(const ActivationStore& store, Index neuron, Index top_n,
                                                     int workers) {
  if (top_n < 2) throw InputError("top_n: need at least 2 images to cluster");
  auto prepared = std::make_shared<PreparedNeuron>();
  prepared->selection = select_top_n(store, neuron, top_n);
  prepared->embeddings.resize(top_n, store.dim());
  for (Index i = 0; i < top_n; ++i) {
    prepared->embeddings.row(i) = store.data().row(prepared->selection.rows[static_cast<std::size_t>(i)]);
  }
  prepared->distances = pairwise_euclidean(prepared->embeddings, workers);
  prepared->dendrogram = ward_agglomerate(prepared->distances);
  return prepared;
}

Discovery discover_from(const ActivationStore& store, std::shared_ptr<const PreparedNeuron> prepared,
                        const DiscoveryParams& params) {
  validate(params);
  const RowMatrix& X = prepared->embeddings;

  Discovery out;
  out.params = params;
  out.cut = cut_dendrogram(prepared->dendrogram, params.d_max);
  const ClusterResult lloyd = kmeans_lloyd(X, partition_means(X, out.cut));
  out.clusters = remove_outliers(lloyd, X, params.tau, params.min_cluster_size);

  for (const int c : out.clusters.surviving) {
    const auto& members = out.clusters.members[static_cast<std::size_t>(c)];
    Vector mean = Vector::Zero(X.cols());
    for (const Index i : members) mean += X.row(i).transpose();
    mean /= static_cast<double>(members.size());
    const double norm = mean.norm();
    if (norm == 0.0) throw DataError("cluster " + std::to_string(c) + " has a zero mean embedding");

    ConceptVector cv;
    cv.direction = mean / norm;
    cv.neuron = prepared->selection.neuron;
    cv.cluster_id = c;
    cv.members = members;
    for (const Index i : members) cv.member_ids.push_back(store.image_id(prepared->selection.rows[static_cast<std::size_t>(i)]));
    out.concepts.push_back(std::move(cv));
  }
  out.prepared = std::move(prepared);
  return out;
}

Discovery discover_concepts(const ActivationStore& store, Index neuron, const DiscoveryParams& params, int workers) {
  validate(params);
  return discover_from(store, prepare_neuron(store, neuron, params.top_n, workers), params);
}

std::vector<SweepRow> sweep_threshold(const PreparedNeuron& prepared,
                                      const std::vector<double>& thresholds, double tau, int min_cluster_size) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0)) throw InputError("thresholds must be positive");
    if (i > 0 && thresholds[i] < thresholds[i - 1]) throw InputError("thresholds must be ascending");
  }
  const RowMatrix& X = prepared.embeddings;
  std::vector<SweepRow> rows;
  rows.reserve(thresholds.size());
  for (const double t : thresholds) {
    const Partition cut = cut_dendrogram(prepared.dendrogram, t);
    const ClusterResult res = remove_outliers(kmeans_lloyd(X, partition_means(X, cut)), X, tau, min_cluster_size);
    rows.push_back({t, cut.count, res.clusters_surviving()});
  }
  return rows;
}

std::vector<SweepRow> sweep_threshold(const ActivationStore& store, Index neuron, Index top_n,
                                      const std::vector<double>& thresholds, double tau, int min_cluster_size) {
  return sweep_threshold(*prepare_neuron(store, neuron, top_n), thresholds, tau, min_cluster_size);
}

}  // namespace concept_forge
