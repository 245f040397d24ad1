#ifndef CONCEPT_FORGE_REPORT_HPP
#define CONCEPT_FORGE_REPORT_HPP

#include "concept_forge/activation_store.hpp"
#include "concept_forge/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace concept_forge {

inline constexpr int kReportSchema = 1;
inline constexpr Index kDefaultTopK = 20;

/// Assembles the per-neuron report: parameters, dendrogram, cluster
/// membership, concept vectors with projection/cosine metrics, distance
/// summaries, 2-D PCA of retained embeddings and top-K projecting images.
nlohmann::json neuron_report(const ActivationStore& store, const Discovery& discovery, Index top_k = kDefaultTopK);

/// Canonical text form of a report; the CLI and the HTTP service both emit
/// exactly this.
std::string serialize_report(const nlohmann::json& report);

/// `neuron_0035.json`
std::string report_file_name(Index neuron);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_REPORT_HPP
