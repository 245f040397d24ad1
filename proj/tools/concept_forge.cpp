// concept_forge: split a neuron's top-activating inputs into concept vectors.
//
//   concept_forge ingest   --store RAW --out STORE
//   concept_forge discover --store STORE --neuron 35 --dmax 15
//   concept_forge sweep    --store STORE --neuron 35 --dmax 5,10,15,20
//   concept_forge audit    --store STORE --neuron all --dmax 15
//   concept_forge serve    --store STORE --port 8080
//   concept_forge synth    --spec synthspec.json --out STORE
//
// Exit codes: 0 ok, 2 input error, 3 data error, 1 anything else.
// Progress goes to stderr; stdout carries CSV summaries only.

#include "concept_forge/activation_store.hpp"
#include "concept_forge/pipeline.hpp"
#include "concept_forge/report.hpp"
#include "concept_forge/service.hpp"
#include "concept_forge/synthetic.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cf = concept_forge;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitData = 3;

constexpr double kDefaultDmax = 15.0;
constexpr const char* kDefaultLayer = "mixed_7b";

struct Options {
  std::string store;
  std::string neuron = "all";
  cf::Index top_n = 100;
  std::optional<std::string> dmax;
  std::string tau = "1.5";
  int min_cluster_size = 5;
  std::string out;
  cf::Index top_k = cf::kDefaultTopK;
  int workers = 1;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string spec;
};

double parse_number(const std::string& text, const std::string& flag) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || std::isnan(value)) throw cf::InputError(flag + ": not a number: '" + text + "'");
  return value;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_number(item, flag));
  if (out.empty()) throw cf::InputError(flag + ": empty list");
  return out;
}

std::vector<cf::Index> parse_neurons(const std::string& text, const cf::ActivationStore& store) {
  std::vector<cf::Index> out;
  if (text == "all") {
    for (cf::Index i = 0; i < store.dim(); ++i) out.push_back(i);
    return out;
  }
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    long long v = 0;
    const auto* end = item.data() + item.size();
    const auto [ptr, ec] = std::from_chars(item.data(), end, v);
    if (ec != std::errc() || ptr != end) throw cf::InputError("--neuron: not an index: '" + item + "'");
    if (v < 0 || v >= store.dim()) {
      throw cf::InputError("--neuron: " + item + " out of range [0, " + std::to_string(store.dim()) + ")");
    }
    out.push_back(static_cast<cf::Index>(v));
  }
  return out;
}

bool is_default_layer(std::string layer) {
  std::transform(layer.begin(), layer.end(), layer.begin(), [](unsigned char c) { return std::tolower(c); });
  return layer.rfind(kDefaultLayer, 0) == 0;
}

/// The default threshold only makes sense on the layer it was tuned for.
double resolve_dmax(const Options& o, const cf::ActivationStore& store) {
  if (o.dmax) return parse_number(*o.dmax, "--dmax");
  if (is_default_layer(store.layer_name())) return kDefaultDmax;
  throw cf::InputError("--dmax is required for layer '" + store.layer_name() + "' (default 15 applies to Mixed_7b only)");
}

cf::DiscoveryParams params_from(const Options& o, const cf::ActivationStore& store) {
  cf::DiscoveryParams p;
  p.top_n = o.top_n;
  p.d_max = resolve_dmax(o, store);
  p.tau = parse_number(o.tau, "--tau");
  p.min_cluster_size = o.min_cluster_size;
  cf::validate(p);
  if (p.top_n > store.rows()) throw cf::InputError("--topn exceeds the number of images (" + std::to_string(store.rows()) + ")");
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw cf::InputError("cannot write " + path.string());
  out << text;
}

int cmd_ingest(const Options& o) {
  const std::filesystem::path src(o.store), dst(o.out);
  const auto raw = cf::load_store(src);
  // thumbnails stay where they are; rewrite paths relative to the new store
  std::filesystem::create_directories(dst);
  cf::Manifest manifest = raw.manifest();
  for (auto& entry : manifest.images) {
    if (!entry.thumb) continue;
    const auto moved = std::filesystem::relative(std::filesystem::absolute(src / *entry.thumb), std::filesystem::absolute(dst));
    entry.thumb = moved.generic_string();
  }
  const cf::ActivationStore store(raw.data(), std::move(manifest));
  cf::save_store(dst, store);
  std::cerr << "ingested " << store.rows() << " x " << store.dim() << " (" << store.layer_name() << ") into " << dst
            << "\n";
  std::cout << "rows,dim,layer\n" << store.rows() << ',' << store.dim() << ',' << store.layer_name() << '\n';
  return 0;
}

int cmd_discover(const Options& o) {
  const auto store = cf::load_store(o.store);
  const auto params = params_from(o, store);
  const auto neurons = parse_neurons(o.neuron, store);
  const std::filesystem::path out_dir(o.out.empty() ? "reports" : o.out);

  std::cout << "neuron,clusters,surviving,retained,report\n";
  for (const cf::Index n : neurons) {
    const cf::Discovery d = cf::discover_concepts(store, n, params, o.workers);
    const auto path = out_dir / cf::report_file_name(n);
    write_text(path, cf::serialize_report(cf::neuron_report(store, d, o.top_k)));
    cf::Index retained = 0;
    for (const auto& cv : d.concepts) retained += cv.member_count();
    if (d.concepts.empty()) std::cerr << "warning: neuron " << n << ": every cluster was dropped\n";
    std::cerr << "neuron " << n << ": C=" << d.cut.count << " C_hat=" << d.clusters.clusters_surviving() << "\n";
    std::cout << n << ',' << d.cut.count << ',' << d.clusters.clusters_surviving() << ',' << retained << ','
              << path.string() << '\n';
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto store = cf::load_store(o.store);
  if (!o.dmax) throw cf::InputError("--dmax: sweep needs a comma-separated threshold list");
  const auto thresholds = parse_number_list(*o.dmax, "--dmax");
  const double tau = parse_number(o.tau, "--tau");
  const auto neurons = parse_neurons(o.neuron, store);

  std::ostringstream csv;
  csv << "neuron,d_max,clusters,surviving\n";
  for (const cf::Index n : neurons) {
    std::cerr << "sweeping neuron " << n << "\n";
    for (const auto& row : cf::sweep_threshold(store, n, o.top_n, thresholds, tau, o.min_cluster_size)) {
      csv << n << ',' << row.d_max << ',' << row.clusters << ',' << row.surviving << '\n';
    }
  }
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(o.out, csv.str());
  }
  return 0;
}

int cmd_audit(const Options& o) {
  const auto store = cf::load_store(o.store);
  const auto params = params_from(o, store);
  const auto neurons = parse_neurons(o.neuron, store);

  std::ostringstream csv;
  csv << "neuron,clusters,surviving,retained,max_activation,polysemantic\n";
  for (const auto& r : cf::audit_neurons(store, neurons, params, o.workers)) {
    csv << r.neuron << ',' << r.clusters << ',' << r.surviving << ',' << r.retained << ',' << r.max_activation << ','
        << (r.surviving > 1 ? 1 : 0) << '\n';
  }
  std::cerr << "audited " << neurons.size() << " neurons\n";
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(o.out, csv.str());
  }
  return 0;
}

int cmd_serve(const Options& o) {
  auto store = std::make_shared<const cf::ActivationStore>(cf::load_store(o.store));
  cf::ServiceConfig config;
  config.store_dir = o.store;
  config.defaults = params_from(o, *store);
  config.top_k = o.top_k;
  config.cache_dir = cf::default_cache_dir(o.store);
  config.workers = o.workers;

  cf::ConceptService service(store, config);
  httplib::Server server;
  service.mount(server);
  std::cerr << "serving " << o.store << " on http://" << o.host << ':' << o.port << "\n";
  if (!server.listen(o.host, o.port)) {
    std::cerr << "error: cannot listen on " << o.host << ':' << o.port << "\n";
    return 1;
  }
  return 0;
}

int cmd_synth(const Options& o) {
  std::ifstream in(o.spec);
  if (!in) throw cf::InputError("synthspec not found: " + o.spec);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw cf::InputError("synthspec " + o.spec + " is not valid JSON: " + e.what());
  }
  const auto data = cf::generate(cf::synthetic_spec_from_json(j));
  cf::save_store(o.out, data.store);

  nlohmann::json truth = {{"directions", nlohmann::json::array()}};
  for (const auto& g : data.directions) truth["directions"].push_back(std::vector<double>(g.data(), g.data() + g.size()));
  write_text(std::filesystem::path(o.out) / "truth.json", truth.dump() + "\n");
  std::cerr << "generated " << data.store.rows() << " x " << data.store.dim() << " into " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangle neurons into concept vectors by clustering their top-activating embeddings"};
  app.require_subcommand(1);
  Options o;

  const auto add_store = [&](CLI::App* cmd) { cmd->add_option("--store", o.store, "Store directory")->required(); };
  const auto add_params = [&](CLI::App* cmd) {
    cmd->add_option("--neuron", o.neuron, "Neuron index, comma list, or 'all'");
    cmd->add_option("--topn", o.top_n, "Top-N activating images per neuron")->capture_default_str();
    cmd->add_option("--tau", o.tau, "Outlier spread multiplier ('inf' disables)")->capture_default_str();
    cmd->add_option("--min-cluster-size", o.min_cluster_size, "Smallest cluster kept")->capture_default_str();
    cmd->add_option("--workers", o.workers, "Threads for distance computation")->capture_default_str();
  };

  auto* ingest = app.add_subcommand("ingest", "Validate and pool raw activations into a store");
  add_store(ingest);
  ingest->add_option("--out", o.out, "Destination store directory")->required();

  auto* discover = app.add_subcommand("discover", "Write a NeuronReport JSON per neuron");
  add_store(discover);
  add_params(discover);
  discover->add_option("--dmax", o.dmax, "Distance threshold (default 15 for Mixed_7b)");
  discover->add_option("--out", o.out, "Report directory (default: reports)");
  discover->add_option("--top-k", o.top_k, "Top projecting images per concept")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Cluster counts across a list of thresholds");
  add_store(sweep);
  add_params(sweep);
  sweep->add_option("--dmax", o.dmax, "Ascending comma-separated thresholds")->required();
  sweep->add_option("--out", o.out, "CSV path (default: stdout)");

  auto* audit = app.add_subcommand("audit", "Summarize C and C-hat for many neurons");
  add_store(audit);
  add_params(audit);
  audit->add_option("--dmax", o.dmax, "Distance threshold (default 15 for Mixed_7b)");
  audit->add_option("--out", o.out, "CSV path (default: stdout)");

  auto* serve = app.add_subcommand("serve", "HTTP API for the web UI");
  add_store(serve);
  add_params(serve);
  serve->add_option("--dmax", o.dmax, "Default distance threshold");
  serve->add_option("--port", o.port, "Port")->capture_default_str();
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--top-k", o.top_k, "Top projecting images per concept")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic store with planted concepts");
  synth->add_option("--spec", o.spec, "synthspec.json")->required();
  synth->add_option("--out", o.out, "Destination store directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*ingest) return cmd_ingest(o);
    if (*discover) return cmd_discover(o);
    if (*sweep) return cmd_sweep(o);
    if (*audit) return cmd_audit(o);
    if (*serve) return cmd_serve(o);
    if (*synth) return cmd_synth(o);
  } catch (const cf::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const cf::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
