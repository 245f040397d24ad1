#ifndef CONCEPT_FORGE_SERVICE_HPP
#define CONCEPT_FORGE_SERVICE_HPP

#include "concept_forge/activation_store.hpp"
#include "concept_forge/pipeline.hpp"
#include "concept_forge/report.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace httplib {
class Server;
}

namespace concept_forge {

/// Memoizes `compute(key)`; concurrent callers with the same key share one
/// computation. Failed computations are evicted so a later call retries.
template <typename Key, typename Value>
class OnceCache {
 public:
  Value get(const Key& key, const std::function<Value()>& compute) {
    std::promise<Value> promise;
    std::shared_future<Value> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      const auto it = entries_.find(key);
      if (it != entries_.end()) {
        future = it->second;
      } else {
        future = promise.get_future().share();
        entries_.emplace(key, future);
        owner = true;
      }
    }
    if (owner) {
      try {
        promise.set_value(compute());
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        entries_.erase(key);
      }
    }
    return future.get();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<Key, std::shared_future<Value>> entries_;
};

struct AuditRow {
  Index neuron;
  int clusters;
  int surviving;
  Index retained;  // images kept across surviving clusters
  double max_activation;
};

/// Discovery summary for each listed neuron, in list order.
std::vector<AuditRow> audit_neurons(const ActivationStore& store, const std::vector<Index>& neurons,
                                    const DiscoveryParams& params, int workers = 1);

struct ServiceConfig {
  std::filesystem::path store_dir;
  DiscoveryParams defaults;
  Index top_k = kDefaultTopK;
  /// Report bodies are persisted here; empty disables the disk cache.
  std::filesystem::path cache_dir;
  int workers = 1;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handlers over one immutable store. Dendrograms are cached per
/// (neuron, N); reports per full parameter tuple.
class ConceptService {
 public:
  ConceptService(std::shared_ptr<const ActivationStore> store, ServiceConfig config);

  HttpResponse neurons();
  HttpResponse dendrogram(const std::string& neuron, const std::multimap<std::string, std::string>& query);
  HttpResponse concepts(const std::string& neuron, const std::multimap<std::string, std::string>& query);
  HttpResponse report(const std::string& neuron);
  HttpResponse thumb(const std::string& image_id);

  /// Report body for validated parameters; same bytes as the CLI writes.
  std::string report_body(Index neuron, const DiscoveryParams& params, Index top_k);

  void mount(httplib::Server& server);

  const ActivationStore& store() const { return *store_; }

 private:
  using PrepKey = std::pair<Index, Index>;
  using ReportKey = std::tuple<Index, Index, double, double, int, Index>;

  std::shared_ptr<const PreparedNeuron> prepared(Index neuron, Index top_n);
  std::optional<Index> parse_neuron(const std::string& text) const;
  std::filesystem::path cache_file(const ReportKey& key) const;

  std::shared_ptr<const ActivationStore> store_;
  ServiceConfig config_;
  OnceCache<PrepKey, std::shared_ptr<const PreparedNeuron>> prepared_;
  OnceCache<ReportKey, std::string> reports_;
  OnceCache<int, std::string> index_;
};

/// Cache directory: CONCEPT_FORGE_CACHE if set, else `<store>/.concept_forge_cache`.
std::filesystem::path default_cache_dir(const std::filesystem::path& store_dir);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_SERVICE_HPP
