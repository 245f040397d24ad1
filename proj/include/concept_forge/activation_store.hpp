#ifndef CONCEPT_FORGE_ACTIVATION_STORE_HPP
#define CONCEPT_FORGE_ACTIVATION_STORE_HPP

#include "concept_forge/npy.hpp"
#include "concept_forge/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace concept_forge {

enum class Pooling { PrePooled, Spatial };

struct ManifestEntry {
  std::string id;
  std::optional<std::string> thumb;  // relative to the store directory
  std::optional<std::string> label;
};

struct Manifest {
  std::string layer_name;
  Pooling pooling = Pooling::PrePooled;
  std::vector<ManifestEntry> images;  // same order as activation rows
};

Manifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

/// Mean over the spatial axes of an (M, d, H, W) tensor.
RowMatrix global_average_pool(const Tensor& t);

/// Immutable pooled activations for one layer, indexed by image id.
///
/// Invariants: rows == image count, ids unique, all entries finite, M >= 1,
/// d >= 1. Safe for concurrent readers.
class ActivationStore {
 public:
  ActivationStore(RowMatrix data, Manifest manifest);

  const RowMatrix& data() const { return data_; }
  Index rows() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }
  const std::string& layer_name() const { return manifest_.layer_name; }
  const Manifest& manifest() const { return manifest_; }
  const std::string& image_id(Index row) const { return manifest_.images[static_cast<std::size_t>(row)].id; }
  std::optional<Index> find(const std::string& image_id) const;

 private:
  RowMatrix data_;
  Manifest manifest_;
  std::unordered_map<std::string, Index> by_id_;
};

/// Validates, pools when the manifest says so, and wraps the result.
/// The returned store always reports Pooling::PrePooled.
ActivationStore build_store(const Tensor& t, Manifest manifest);

/// Store directory layout: activations.npy + manifest.json.
inline constexpr const char* kActivationsFile = "activations.npy";
inline constexpr const char* kManifestFile = "manifest.json";

ActivationStore load_store(const std::filesystem::path& dir);
void save_store(const std::filesystem::path& dir, const ActivationStore& store);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_ACTIVATION_STORE_HPP
