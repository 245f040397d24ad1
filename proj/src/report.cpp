#include "concept_forge/report.hpp"

#include "concept_forge/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace concept_forge {

namespace {

nlohmann::json to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

// JSON has no infinity; tau = inf (outlier removal off) is written as "inf".
nlohmann::json tau_json(double tau) { return std::isinf(tau) ? nlohmann::json("inf") : nlohmann::json(tau); }

}  // namespace

nlohmann::json neuron_report(const ActivationStore& store, const Discovery& discovery, Index top_k) {
  const PreparedNeuron& prep = *discovery.prepared;
  const NeuronSelection& sel = prep.selection;
  const Index neuron = sel.neuron;
  const auto id_of = [&](Index selected) { return store.image_id(sel.rows[static_cast<std::size_t>(selected)]); };
  top_k = std::min(top_k, store.rows());

  nlohmann::json selection_ids = nlohmann::json::array();
  for (std::size_t i = 0; i < sel.rows.size(); ++i) selection_ids.push_back(id_of(static_cast<Index>(i)));

  const ClusterResult& cr = discovery.clusters;
  nlohmann::json clusters = {{"k_requested", cr.k_requested},
                             {"surviving", cr.clusters_surviving()},
                             {"surviving_ids", cr.surviving},
                             {"cut_labels", discovery.cut.labels},
                             {"assignment", cr.assignment},
                             {"labels", cr.labels},
                             {"kmeans_iterations", cr.iterations},
                             {"sse_history", cr.sse_history}};

  nlohmann::json concepts = nlohmann::json::array();
  nlohmann::json top_projecting = nlohmann::json::array();
  for (const ConceptVector& cv : discovery.concepts) {
    RowMatrix members(cv.member_count(), store.dim());
    for (Index i = 0; i < cv.member_count(); ++i) members.row(i) = prep.embeddings.row(cv.members[static_cast<std::size_t>(i)]);
    const ProjectionSet p = projections(members, cv.direction, neuron);

    concepts.push_back({{"cluster_id", cv.cluster_id},
                        {"vector", to_json(cv.direction)},
                        {"members", cv.member_ids},
                        {"member_count", cv.member_count()},
                        {"metrics",
                         {{"projection_concept", to_json(p.onto_concept)},
                          {"projection_neuron", to_json(p.onto_neuron)},
                          {"cosine_concept", to_json(p.cosine_concept)},
                          {"cosine_neuron", to_json(p.cosine_neuron)},
                          {"mean_projection_concept", p.onto_concept.mean()},
                          {"mean_projection_neuron", p.onto_neuron.mean()},
                          {"mean_cosine_concept", p.cosine_concept.mean()},
                          {"mean_cosine_neuron", p.cosine_neuron.mean()}}}});

    const ProjectionRanking ranking = max_projecting(store, cv.direction, top_k);
    nlohmann::json ids = nlohmann::json::array();
    for (const Index r : ranking.rows) ids.push_back(store.image_id(r));
    top_projecting.push_back({{"cluster_id", cv.cluster_id}, {"ids", std::move(ids)}, {"projections", ranking.scores}});
  }

  const DistanceSummary ds = distance_summary(prep.distances, cr.labels);
  nlohmann::json retained_ids = nlohmann::json::array();
  for (const Index i : ds.retained_order) retained_ids.push_back(id_of(i));

  nlohmann::json pca = nullptr;
  if (ds.retained_order.size() >= 2) {
    RowMatrix retained(static_cast<Index>(ds.retained_order.size()), store.dim());
    nlohmann::json pca_labels = nlohmann::json::array();
    for (std::size_t a = 0; a < ds.retained_order.size(); ++a) {
      retained.row(static_cast<Index>(a)) = prep.embeddings.row(ds.retained_order[a]);
      pca_labels.push_back(cr.labels[static_cast<std::size_t>(ds.retained_order[a])]);
    }
    pca = {{"ids", retained_ids}, {"labels", std::move(pca_labels)}, {"coords", to_json(pca_2d(retained))}};
  }

  return {{"schema", kReportSchema},
          {"neuron", neuron},
          {"layer_name", store.layer_name()},
          {"params",
           {{"top_n", discovery.params.top_n},
            {"d_max", discovery.params.d_max},
            {"tau", tau_json(discovery.params.tau)},
            {"min_cluster_size", discovery.params.min_cluster_size},
            {"top_k", top_k}}},
          {"selection", {{"ids", std::move(selection_ids)}, {"activations", sel.activations}}},
          {"dendrogram", dendrogram_to_json(prep.dendrogram)},
          {"clusters", std::move(clusters)},
          {"concepts", std::move(concepts)},
          {"distance_summary",
           {{"full", to_json(ds.full)},
            {"retained", to_json(ds.retained)},
            {"retained_ids", std::move(retained_ids)},
            {"mean_intra", optional_number(ds.mean_intra)},
            {"mean_inter", optional_number(ds.mean_inter)}}},
          {"pca", std::move(pca)},
          {"top_projecting", std::move(top_projecting)}};
}

std::string serialize_report(const nlohmann::json& report) { return report.dump(1) + "\n"; }

std::string report_file_name(Index neuron) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "neuron_%04ld.json", static_cast<long>(neuron));
  return buf;
}

}  // namespace concept_forge
