#ifndef CONCEPT_FORGE_PIPELINE_HPP
#define CONCEPT_FORGE_PIPELINE_HPP

#include "concept_forge/activation_store.hpp"
#include "concept_forge/kmeans.hpp"
#include "concept_forge/types.hpp"
#include "concept_forge/ward.hpp"

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace concept_forge {

struct NeuronSelection {
  Index neuron = 0;
  /// Store rows of the top-N images, activation descending, ties by row.
  std::vector<Index> rows;
  std::vector<double> activations;
};

NeuronSelection select_top_n(const ActivationStore& store, Index neuron, Index top_n);

struct DiscoveryParams {
  Index top_n = 100;
  double d_max = 15.0;
  double tau = 1.5;
  int min_cluster_size = 5;

  bool operator==(const DiscoveryParams&) const = default;
};

/// Validates a parameter set; throws InputError naming the offending field.
void validate(const DiscoveryParams& params);

/// Everything about one neuron that does not depend on the threshold.
struct PreparedNeuron {
  NeuronSelection selection;
  RowMatrix embeddings;  // selected rows, in selection order
  Matrix distances;
  Dendrogram dendrogram;
};

std::shared_ptr<const PreparedNeuron> prepare_neuron(const ActivationStore& store, Index neuron, Index top_n,
                                                     int workers = 1);

struct ConceptVector {
  Vector direction;  // unit norm
  Index neuron = 0;
  int cluster_id = 0;
  /// Indices into the neuron's selection (not store rows).
  std::vector<Index> members;
  std::vector<std::string> member_ids;

  Index member_count() const { return static_cast<Index>(members.size()); }
};

struct Discovery {
  DiscoveryParams params;
  std::shared_ptr<const PreparedNeuron> prepared;
  Partition cut;
  ClusterResult clusters;
  std::vector<ConceptVector> concepts;

  Index neuron() const { return prepared->selection.neuron; }
};

/// Threshold-dependent half of the pipeline: cut, k-means seeded from the
/// cut's cluster means, outlier removal, normalized cluster means.
Discovery discover_from(const ActivationStore& store, std::shared_ptr<const PreparedNeuron> prepared,
                        const DiscoveryParams& params);

/// Full pipeline for one neuron. An empty concept list is a valid outcome.
Discovery discover_concepts(const ActivationStore& store, Index neuron, const DiscoveryParams& params,
                            int workers = 1);

struct SweepRow {
  double d_max;
  int clusters;   // C, from the dendrogram cut
  int surviving;  // C-hat, after k-means and filtering
};

/// One dendrogram, re-cut at every threshold. Thresholds must be positive
/// and non-decreasing.
std::vector<SweepRow> sweep_threshold(const PreparedNeuron& prepared,
                                      const std::vector<double>& thresholds, double tau, int min_cluster_size);

std::vector<SweepRow> sweep_threshold(const ActivationStore& store, Index neuron, Index top_n,
                                      const std::vector<double>& thresholds, double tau = 1.5,
                                      int min_cluster_size = 5);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_PIPELINE_HPP
