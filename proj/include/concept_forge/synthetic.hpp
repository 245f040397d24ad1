#ifndef CONCEPT_FORGE_SYNTHETIC_HPP
#define CONCEPT_FORGE_SYNTHETIC_HPP

#include "concept_forge/activation_store.hpp"
#include "concept_forge/pipeline.hpp"
#include "concept_forge/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace concept_forge {

/// SplitMix64 (Steele, Lea & Flood 2014): state advances by the golden-gamma
/// constant and each output is a fixed bit mix of the state, so the integer
/// stream for a seed is identical on every platform. Normals come from the
/// Box-Muller transform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

struct PlantedConcept {
  Vector direction;  // unit norm, positive on `neuron`
  Index neuron = 0;
  Index count = 0;
  double sigma = 0.0;  // per-coordinate noise
};

struct SyntheticSpec {
  Index d = 0;
  Index M = 0;  // total rows; rows beyond the concept samples are background
  double sigma_background = 0.0;
  std::uint64_t seed = 0;
  std::vector<PlantedConcept> concepts;
};

inline constexpr double kMaxConceptCosine = 0.3;

/// Throws InputError if any SyntheticSpec invariant fails.
void validate(const SyntheticSpec& spec);

/// Unit directions loading * e_neuron + sqrt(1 - loading^2) * u, where the u
/// are random and orthogonal to each other and to every listed neuron axis.
/// Two directions sharing a neuron then have cosine loading_a * loading_b.
std::vector<Vector> plant_directions(Index d, const std::vector<std::pair<Index, double>>& neuron_loadings,
                                     std::uint64_t seed);

/// `synthspec.json`: {"d", "M", "seed", "sigma_background", "concepts": [
/// {"neuron", "count", "sigma", and either "direction" or "loading"}]}.
/// Directions given by loading are planted with `plant_directions`.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

struct SyntheticData {
  ActivationStore store;
  /// Concept index per row; -1 for background.
  std::vector<int> truth;
  std::vector<Vector> directions;
};

/// Concept samples are a * g + sigma * z with a ~ U[0.75, 1.25); background
/// rows are sigma_background * z. Rows are shuffled; ids are `c<j>_<k>` or
/// `bg_<k>`. Deterministic for a fixed seed.
SyntheticData generate(const SyntheticSpec& spec);

/// Ground-truth concept parsed from an id written by `generate`, -1 for
/// background or foreign ids.
int truth_label_of(const std::string& image_id);

/// Assignment maximizing total score over a rectangular matrix. Returns, per
/// row, the matched column or -1 when there are more rows than columns.
std::vector<int> hungarian_max(const Matrix& score);

struct RecoveryScore {
  /// Pairs (found index, truth index).
  std::vector<std::pair<int, int>> matches;
  std::vector<double> cosines;    // |cos| per match
  std::vector<double> precision;  // share of found members from the matched concept
  std::vector<double> recall;     // share of the matched concept's samples found
  double mean_cosine = 0.0;
  double overall_precision = 0.0;
};

RecoveryScore score_recovery(const std::vector<Vector>& found, const std::vector<Vector>& truth);

/// Adds membership precision/recall using the ids written by `generate`.
RecoveryScore score_recovery(const std::vector<ConceptVector>& found, const SyntheticData& data);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_SYNTHETIC_HPP
