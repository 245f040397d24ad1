#include "concept_forge/service.hpp"

#include "concept_forge/ward.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace concept_forge {

namespace {

struct ParamError {
  std::string field;
  std::string message;
};

std::optional<std::string> query_value(const std::multimap<std::string, std::string>& query, const std::string& name) {
  const auto it = query.find(name);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

double parse_double(const std::multimap<std::string, std::string>& query, const std::string& name, double fallback) {
  const auto text = query_value(query, name);
  if (!text) return fallback;
  double value = 0.0;
  const auto* end = text->data() + text->size();
  const auto [ptr, ec] = std::from_chars(text->data(), end, value);
  if (ec != std::errc() || ptr != end || std::isnan(value)) throw ParamError{name, "not a number: '" + *text + "'"};
  return value;
}

Index parse_index(const std::multimap<std::string, std::string>& query, const std::string& name, Index fallback) {
  const auto text = query_value(query, name);
  if (!text) return fallback;
  long long value = 0;
  const auto* end = text->data() + text->size();
  const auto [ptr, ec] = std::from_chars(text->data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParamError{name, "not an integer: '" + *text + "'"};
  return static_cast<Index>(value);
}

HttpResponse json_response(int status, const nlohmann::json& body) { return {status, body.dump() + "\n", "application/json"}; }

HttpResponse error_response(int status, const std::string& message, const std::string& field = {}) {
  nlohmann::json body = {{"schema", kReportSchema}, {"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_response(status, body);
}

std::uint64_t fingerprint(const ActivationStore& store) {
  // FNV-1a over the raw activation bytes and image ids
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(store.data().data(), static_cast<std::size_t>(store.data().size()) * sizeof(double));
  for (Index i = 0; i < store.rows(); ++i) mix(store.image_id(i).data(), store.image_id(i).size());
  return h;
}

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<AuditRow> audit_neurons(const ActivationStore& store, const std::vector<Index>& neurons,
                                    const DiscoveryParams& params, int workers) {
  std::vector<AuditRow> rows;
  rows.reserve(neurons.size());
  for (const Index n : neurons) {
    const Discovery d = discover_concepts(store, n, params, workers);
    Index retained = 0;
    for (const auto& cv : d.concepts) retained += cv.member_count();
    rows.push_back({n, d.cut.count, d.clusters.clusters_surviving(), retained, d.prepared->selection.activations.front()});
  }
  return rows;
}

std::filesystem::path default_cache_dir(const std::filesystem::path& store_dir) {
  if (const char* env = std::getenv("CONCEPT_FORGE_CACHE"); env != nullptr && *env != '\0') return env;
  return store_dir / ".concept_forge_cache";
}

ConceptService::ConceptService(std::shared_ptr<const ActivationStore> store, ServiceConfig config)
    : store_(std::move(store)), config_(std::move(config)) {
  validate(config_.defaults);
  if (!config_.cache_dir.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint(*store_)));
    config_.cache_dir /= buf;
  }
}

std::shared_ptr<const PreparedNeuron> ConceptService::prepared(Index neuron, Index top_n) {
  return prepared_.get({neuron, top_n}, [&] { return prepare_neuron(*store_, neuron, top_n, config_.workers); });
}

std::optional<Index> ConceptService::parse_neuron(const std::string& text) const {
  long long value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 0 || value >= store_->dim()) return std::nullopt;
  return static_cast<Index>(value);
}

std::filesystem::path ConceptService::cache_file(const ReportKey& key) const {
  const auto& [neuron, top_n, d_max, tau, min_size, top_k] = key;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s__N%ld__dmax%.17g__tau%.17g__min%d__k%ld.json",
                report_file_name(neuron).substr(0, 11).c_str(), static_cast<long>(top_n), d_max, tau, min_size,
                static_cast<long>(top_k));
  return config_.cache_dir / buf;
}

std::string ConceptService::report_body(Index neuron, const DiscoveryParams& params, Index top_k) {
  const ReportKey key{neuron, params.top_n, params.d_max, params.tau, params.min_cluster_size, top_k};
  return reports_.get(key, [&] {
    const auto path = config_.cache_dir.empty() ? std::filesystem::path() : cache_file(key);
    if (!path.empty()) {
      if (auto cached = read_file(path)) return *cached;
    }
    const Discovery d = discover_from(*store_, prepared(neuron, params.top_n), params);
    std::string body = serialize_report(neuron_report(*store_, d, top_k));
    if (!path.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
      const auto tmp = path.string() + ".tmp" + std::to_string(reinterpret_cast<std::uintptr_t>(&body));
      if (std::ofstream out(tmp, std::ios::binary); out) {
        out << body;
        out.close();
        std::filesystem::rename(tmp, path, ec);
      }
    }
    return body;
  });
}

HttpResponse ConceptService::neurons() {
  const std::string body = index_.get(0, [&] {
    std::vector<Index> all(static_cast<std::size_t>(store_->dim()));
    for (Index i = 0; i < store_->dim(); ++i) all[static_cast<std::size_t>(i)] = i;
    nlohmann::json list = nlohmann::json::array();
    for (const AuditRow& r : audit_neurons(*store_, all, config_.defaults, config_.workers)) {
      list.push_back({{"neuron", r.neuron},
                      {"clusters", r.clusters},
                      {"surviving", r.surviving},
                      {"retained", r.retained},
                      {"polysemantic", r.surviving > 1},
                      {"max_activation", r.max_activation}});
    }
    const auto& p = config_.defaults;
    nlohmann::json body = {{"schema", kReportSchema},
                           {"layer_name", store_->layer_name()},
                           {"rows", store_->rows()},
                           {"dim", store_->dim()},
                           {"params",
                            {{"top_n", p.top_n},
                             {"d_max", p.d_max},
                             {"tau", std::isinf(p.tau) ? nlohmann::json("inf") : nlohmann::json(p.tau)},
                             {"min_cluster_size", p.min_cluster_size}}},
                           {"neurons", std::move(list)}};
    return body.dump() + "\n";
  });
  return {200, body, "application/json"};
}

HttpResponse ConceptService::dendrogram(const std::string& neuron_text,
                                        const std::multimap<std::string, std::string>& query) {
  const auto neuron = parse_neuron(neuron_text);
  if (!neuron) return error_response(404, "unknown neuron '" + neuron_text + "'");
  try {
    const Index top_n = parse_index(query, "N", config_.defaults.top_n);
    if (top_n < 2 || top_n > store_->rows()) {
      throw ParamError{"N", "must be in [2, " + std::to_string(store_->rows()) + "]"};
    }
    const auto prep = prepared(*neuron, top_n);
    nlohmann::json ids = nlohmann::json::array();
    for (const Index r : prep->selection.rows) ids.push_back(store_->image_id(r));
    return json_response(200, {{"schema", kReportSchema},
                               {"neuron", *neuron},
                               {"top_n", top_n},
                               {"ids", std::move(ids)},
                               {"dendrogram", dendrogram_to_json(prep->dendrogram)}});
  } catch (const ParamError& e) {
    return error_response(400, e.field + ": " + e.message, e.field);
  } catch (const InputError& e) {
    return error_response(400, e.what());
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
}

HttpResponse ConceptService::concepts(const std::string& neuron_text,
                                      const std::multimap<std::string, std::string>& query) {
  const auto neuron = parse_neuron(neuron_text);
  if (!neuron) return error_response(404, "unknown neuron '" + neuron_text + "'");
  try {
    DiscoveryParams p = config_.defaults;
    p.top_n = parse_index(query, "N", p.top_n);
    p.d_max = parse_double(query, "dmax", p.d_max);
    p.tau = parse_double(query, "tau", p.tau);
    p.min_cluster_size = static_cast<int>(parse_index(query, "min_cluster_size", p.min_cluster_size));
    const Index top_k = parse_index(query, "k", config_.top_k);
    if (p.top_n < 2 || p.top_n > store_->rows()) {
      throw ParamError{"N", "must be in [2, " + std::to_string(store_->rows()) + "]"};
    }
    if (!(p.d_max > 0.0)) throw ParamError{"dmax", "must be positive"};
    if (!(p.tau > 0.0)) throw ParamError{"tau", "must be positive"};
    if (p.min_cluster_size < 1) throw ParamError{"min_cluster_size", "must be at least 1"};
    if (top_k < 0 || top_k > store_->rows()) throw ParamError{"k", "must be in [0, " + std::to_string(store_->rows()) + "]"};
    return {200, report_body(*neuron, p, top_k), "application/json"};
  } catch (const ParamError& e) {
    return error_response(400, e.field + ": " + e.message, e.field);
  } catch (const InputError& e) {
    return error_response(400, e.what());
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
}

HttpResponse ConceptService::report(const std::string& neuron_text) {
  const auto neuron = parse_neuron(neuron_text);
  if (!neuron) return error_response(404, "unknown neuron '" + neuron_text + "'");
  try {
    return {200, report_body(*neuron, config_.defaults, config_.top_k), "application/json"};
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
}

HttpResponse ConceptService::thumb(const std::string& image_id) {
  const auto row = store_->find(image_id);
  if (!row) return error_response(404, "unknown image id '" + image_id + "'");
  const auto& entry = store_->manifest().images[static_cast<std::size_t>(*row)];
  if (!entry.thumb) return error_response(404, "no thumbnail for '" + image_id + "'");
  const std::filesystem::path rel(*entry.thumb);
  for (const auto& part : rel) {
    if (part == "..") return error_response(404, "thumbnail path escapes the store");
  }
  const auto path = config_.store_dir / rel;
  auto bytes = read_file(path);
  if (!bytes) return error_response(404, "thumbnail missing: " + rel.string());
  return {200, std::move(*bytes), content_type_for(path)};
}

void ConceptService::mount(httplib::Server& server) {
  const auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/api/neurons", [this, send](const httplib::Request&, httplib::Response& res) { send(res, neurons()); });
  server.Get(R"(/api/neuron/([^/]+)/dendrogram)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, dendrogram(req.matches[1], req.params));
  });
  server.Get(R"(/api/neuron/([^/]+)/concepts)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, concepts(req.matches[1], req.params));
  });
  server.Get(R"(/api/report/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, report(req.matches[1]));
  });
  server.Get(R"(/api/thumb/(.+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, thumb(req.matches[1]));
  });
}

}  // namespace concept_forge
