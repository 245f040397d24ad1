#include "concept_forge/activation_store.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

namespace concept_forge {

namespace {

std::optional<std::string> optional_string(const nlohmann::json& entry, const char* key) {
  const auto it = entry.find(key);
  if (it == entry.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw InputError(std::string("manifest: '") + key + "' must be a string or null");
  return it->get<std::string>();
}

}  // namespace

Manifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("manifest: top level must be an object");
  Manifest m;
  if (!j.contains("layer_name") || !j["layer_name"].is_string()) {
    throw InputError("manifest: missing string field 'layer_name'");
  }
  m.layer_name = j["layer_name"].get<std::string>();

  const std::string pooling = j.value("pooling", std::string("pre_pooled"));
  if (pooling == "pre_pooled") {
    m.pooling = Pooling::PrePooled;
  } else if (pooling == "spatial") {
    m.pooling = Pooling::Spatial;
  } else {
    throw InputError("manifest: pooling must be \"pre_pooled\" or \"spatial\", got \"" + pooling + "\"");
  }

  if (!j.contains("images") || !j["images"].is_array()) throw InputError("manifest: missing array field 'images'");
  for (const auto& entry : j["images"]) {
    if (!entry.contains("id") || !entry["id"].is_string()) throw InputError("manifest: image entry without string 'id'");
    ManifestEntry e{entry["id"].get<std::string>(), optional_string(entry, "thumb"), optional_string(entry, "label")};
    if (e.thumb && std::filesystem::path(*e.thumb).is_absolute()) {
      throw InputError("manifest: thumbnail path must be relative: " + *e.thumb);
    }
    m.images.push_back(std::move(e));
  }
  return m;
}

nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& e : m.images) {
    images.push_back({{"id", e.id},
                      {"thumb", e.thumb ? nlohmann::json(*e.thumb) : nlohmann::json(nullptr)},
                      {"label", e.label ? nlohmann::json(*e.label) : nlohmann::json(nullptr)}});
  }
  return {{"layer_name", m.layer_name},
          {"pooling", m.pooling == Pooling::Spatial ? "spatial" : "pre_pooled"},
          {"images", std::move(images)}};
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("manifest not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

RowMatrix global_average_pool(const Tensor& t) {
  if (t.rank() != 4) throw ShapeError("global_average_pool expects a 4-D tensor");
  const auto m = static_cast<Index>(t.shape[0]);
  const auto d = static_cast<Index>(t.shape[1]);
  const std::size_t plane = t.shape[2] * t.shape[3];
  if (plane == 0) throw ShapeError("global_average_pool: spatial extent must be at least 1x1");

  RowMatrix out(m, d);
  const double* src = t.values.data();
  for (Index i = 0; i < m; ++i) {
    for (Index c = 0; c < d; ++c, src += plane) {
      double sum = 0.0;
      for (std::size_t k = 0; k < plane; ++k) sum += src[k];
      out(i, c) = sum / static_cast<double>(plane);
    }
  }
  return out;
}

ActivationStore::ActivationStore(RowMatrix data, Manifest manifest)
    : data_(std::move(data)), manifest_(std::move(manifest)) {
  if (data_.rows() < 1 || data_.cols() < 1) throw ShapeError("activation store needs M >= 1 and d >= 1");
  if (static_cast<std::size_t>(data_.rows()) != manifest_.images.size()) {
    throw ManifestMismatch("activation rows (" + std::to_string(data_.rows()) + ") != manifest entries (" +
                           std::to_string(manifest_.images.size()) + ")");
  }
  if (!data_.allFinite()) throw DataError("activations contain NaN or Inf");
  for (Index i = 0; i < data_.rows(); ++i) {
    if (!by_id_.emplace(image_id(i), i).second) throw InputError("duplicate image id: " + image_id(i));
  }
  manifest_.pooling = Pooling::PrePooled;
}

std::optional<Index> ActivationStore::find(const std::string& image_id) const {
  const auto it = by_id_.find(image_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

ActivationStore build_store(const Tensor& t, Manifest manifest) {
  if (t.shape.empty() || t.shape[0] != manifest.images.size()) {
    throw ManifestMismatch("tensor has " + std::to_string(t.shape.empty() ? 0 : t.shape[0]) +
                           " rows but manifest lists " + std::to_string(manifest.images.size()) + " images");
  }
  RowMatrix data;
  if (manifest.pooling == Pooling::Spatial) {
    if (t.rank() != 4) throw ManifestMismatch("manifest says spatial but tensor is not 4-D");
    data = global_average_pool(t);
  } else {
    if (t.rank() != 2) throw ManifestMismatch("manifest says pre_pooled but tensor is not 2-D");
    data = Eigen::Map<const RowMatrix>(t.values.data(), static_cast<Index>(t.shape[0]),
                                       static_cast<Index>(t.shape[1]));
  }
  return ActivationStore(std::move(data), std::move(manifest));
}

ActivationStore load_store(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  if (!std::filesystem::exists(manifest_path)) throw InputError("manifest not found: " + manifest_path.string());
  const auto npy_path = dir / kActivationsFile;
  if (!std::filesystem::exists(npy_path)) throw InputError("activations not found: " + npy_path.string());
  return build_store(load_npy(npy_path), load_manifest(manifest_path));
}

void save_store(const std::filesystem::path& dir, const ActivationStore& store) {
  std::filesystem::create_directories(dir);
  save_npy(dir / kActivationsFile, store.data());
  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  if (!out) throw InputError("cannot write " + (dir / kManifestFile).string());
  out << manifest_to_json(store.manifest()).dump(2) << '\n';
}

}  // namespace concept_forge
