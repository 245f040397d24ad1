#ifndef CONCEPT_FORGE_WARD_HPP
#define CONCEPT_FORGE_WARD_HPP

#include "concept_forge/types.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace concept_forge {

/// One agglomeration step. Leaves are 0..N-1; the cluster created by merge
/// k gets id N+k.
struct Merge {
  Index left;   // smaller id
  Index right;  // larger id
  double height;
  Index size;
};

struct Dendrogram {
  Index leaves = 0;
  std::vector<Merge> merges;  // N-1 entries, heights non-decreasing
};

/// Flat clustering of the leaves. Labels are 0..count-1, numbered in order
/// of each cluster's smallest leaf.
struct Partition {
  std::vector<int> labels;
  int count = 0;
};

/// Ward-linkage agglomeration over a precomputed Euclidean distance matrix.
///
/// Merges the pair with the smallest current linkage, updating linkages with
/// the Lance-Williams Ward recurrence. Ties go to the lexicographically
/// smallest (min_id, max_id) pair. Singleton-singleton linkage is the plain
/// Euclidean distance, so heights are on the same scale as D.
///
/// Throws InputError if D is not square, symmetric, finite and non-negative,
/// or has fewer than two rows.
Dendrogram ward_agglomerate(const Matrix& D);

/// Applies every merge with height strictly below `d_max` and returns the
/// connected components.
Partition cut_dendrogram(const Dendrogram& dgm, double d_max);

/// Number of clusters `cut_dendrogram` would return, without labels.
int cluster_count(const Dendrogram& dgm, double d_max);

/// `{"leaves": N, "merges": [[left, right, height, size], ...]}`, heights
/// rounded to 12 significant digits.
nlohmann::json dendrogram_to_json(const Dendrogram& dgm);
Dendrogram dendrogram_from_json(const nlohmann::json& j);

/// Rounds to `digits` significant decimal digits.
double round_significant(double value, int digits);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_WARD_HPP
