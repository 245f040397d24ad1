#include "concept_forge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

namespace concept_forge {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
  if (spare_) {
    const double out = *spare_;
    spare_.reset();
    return out;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

void validate(const SyntheticSpec& spec) {
  if (spec.d < 1) throw InputError("synthetic: d must be >= 1");
  if (spec.concepts.empty()) throw InputError("synthetic: at least one concept is required");
  if (!(spec.sigma_background >= 0.0)) throw InputError("synthetic: sigma_background must be >= 0");
  Index total = 0;
  for (std::size_t j = 0; j < spec.concepts.size(); ++j) {
    const auto& c = spec.concepts[j];
    const std::string where = "synthetic: concept " + std::to_string(j) + ": ";
    if (c.direction.size() != spec.d) throw InputError(where + "direction has wrong width");
    if (std::abs(c.direction.norm() - 1.0) > 1e-9) throw InputError(where + "direction must be unit norm");
    if (c.neuron < 0 || c.neuron >= spec.d) throw InputError(where + "neuron out of range");
    if (!(c.direction(c.neuron) > 0.0)) throw InputError(where + "direction must load positively on its neuron");
    if (c.count < 1) throw InputError(where + "count must be >= 1");
    if (!(c.sigma >= 0.0)) throw InputError(where + "sigma must be >= 0");
    for (std::size_t k = 0; k < j; ++k) {
      if (c.direction.dot(spec.concepts[k].direction) > kMaxConceptCosine + 1e-12) {
        throw InputError(where + "cosine with concept " + std::to_string(k) + " exceeds 0.3");
      }
    }
    total += c.count;
  }
  if (spec.M < total) throw InputError("synthetic: M is smaller than the number of concept samples");
}

std::vector<Vector> plant_directions(Index d, const std::vector<std::pair<Index, double>>& neuron_loadings,
                                     std::uint64_t seed) {
  std::set<Index> axes;
  for (const auto& [neuron, loading] : neuron_loadings) {
    if (neuron < 0 || neuron >= d) throw InputError("plant_directions: neuron out of range");
    if (!(loading > 0.0 && loading <= 1.0)) throw InputError("plant_directions: loading must be in (0, 1]");
    axes.insert(neuron);
  }
  if (static_cast<Index>(axes.size() + neuron_loadings.size()) > d) {
    throw InputError("plant_directions: d too small for the requested concepts");
  }

  std::vector<Vector> basis;
  for (const Index a : axes) basis.push_back(Vector::Unit(d, a));

  SplitMix64 rng(seed);
  std::vector<Vector> out;
  for (const auto& [neuron, loading] : neuron_loadings) {
    Vector u(d);
    double norm = 0.0;
    while (norm < 1e-6) {
      for (Index i = 0; i < d; ++i) u(i) = rng.normal();
      for (int pass = 0; pass < 2; ++pass) {
        for (const Vector& b : basis) u -= u.dot(b) * b;
      }
      norm = u.norm();
    }
    u /= norm;
    basis.push_back(u);
    Vector g = std::sqrt(1.0 - loading * loading) * u;
    g(neuron) += loading;
    out.push_back(g / g.norm());
  }
  return out;
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  try {
    spec.d = j.at("d").get<Index>();
    spec.M = j.at("M").get<Index>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.sigma_background = j.value("sigma_background", 0.0);

    std::vector<std::pair<Index, double>> to_plant;
    std::vector<std::size_t> planted_slots;
    for (const auto& c : j.at("concepts")) {
      PlantedConcept pc;
      pc.neuron = c.at("neuron").get<Index>();
      pc.count = c.at("count").get<Index>();
      pc.sigma = c.value("sigma", 0.0);
      if (c.contains("direction")) {
        const auto values = c["direction"].get<std::vector<double>>();
        pc.direction = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
      } else {
        to_plant.emplace_back(pc.neuron, c.at("loading").get<double>());
        planted_slots.push_back(spec.concepts.size());
      }
      spec.concepts.push_back(std::move(pc));
    }
    if (!to_plant.empty()) {
      const auto dirs = plant_directions(spec.d, to_plant, spec.seed ^ 0xd1b54a32d192ed03ULL);
      for (std::size_t k = 0; k < dirs.size(); ++k) spec.concepts[planted_slots[k]].direction = dirs[k];
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("synthspec: ") + e.what());
  }
  validate(spec);
  return spec;
}

SyntheticData generate(const SyntheticSpec& spec) {
  validate(spec);
  SplitMix64 rng(spec.seed);

  RowMatrix rows(spec.M, spec.d);
  std::vector<int> truth;
  std::vector<std::string> ids;
  truth.reserve(static_cast<std::size_t>(spec.M));
  ids.reserve(static_cast<std::size_t>(spec.M));

  Index r = 0;
  char buf[48];
  for (std::size_t j = 0; j < spec.concepts.size(); ++j) {
    const auto& c = spec.concepts[j];
    for (Index k = 0; k < c.count; ++k, ++r) {
      const double a = 0.75 + 0.5 * rng.uniform();
      for (Index i = 0; i < spec.d; ++i) rows(r, i) = a * c.direction(i) + c.sigma * rng.normal();
      std::snprintf(buf, sizeof buf, "c%zu_%05ld", j, static_cast<long>(k));
      ids.emplace_back(buf);
      truth.push_back(static_cast<int>(j));
    }
  }
  for (Index k = 0; r < spec.M; ++k, ++r) {
    for (Index i = 0; i < spec.d; ++i) rows(r, i) = spec.sigma_background * rng.normal();
    std::snprintf(buf, sizeof buf, "bg_%05ld", static_cast<long>(k));
    ids.emplace_back(buf);
    truth.push_back(-1);
  }

  // Fisher-Yates on row order
  std::vector<Index> perm(static_cast<std::size_t>(spec.M));
  for (Index i = 0; i < spec.M; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Index i = spec.M - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }

  RowMatrix shuffled(spec.M, spec.d);
  Manifest manifest;
  manifest.layer_name = "synthetic";
  std::vector<int> shuffled_truth;
  for (Index i = 0; i < spec.M; ++i) {
    const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
    shuffled.row(i) = rows.row(static_cast<Index>(src));
    manifest.images.push_back({ids[src], std::nullopt, std::nullopt});
    shuffled_truth.push_back(truth[src]);
  }

  std::vector<Vector> directions;
  for (const auto& c : spec.concepts) directions.push_back(c.direction);
  return {ActivationStore(std::move(shuffled), std::move(manifest)), std::move(shuffled_truth), std::move(directions)};
}

int truth_label_of(const std::string& image_id) {
  if (image_id.size() < 3 || image_id[0] != 'c') return -1;
  const auto sep = image_id.find('_');
  if (sep == std::string::npos || sep == 1) return -1;
  int value = 0;
  for (std::size_t i = 1; i < sep; ++i) {
    if (image_id[i] < '0' || image_id[i] > '9') return -1;
    value = value * 10 + (image_id[i] - '0');
  }
  return value;
}

std::vector<int> hungarian_max(const Matrix& score) {
  const Index rows = score.rows(), cols = score.cols();
  if (rows == 0) return {};
  if (rows > cols) {
    const std::vector<int> by_col = hungarian_max(score.transpose());
    std::vector<int> out(static_cast<std::size_t>(rows), -1);
    for (Index c = 0; c < cols; ++c) out[static_cast<std::size_t>(by_col[static_cast<std::size_t>(c)])] = static_cast<int>(c);
    return out;
  }

  // Shortest augmenting path with potentials, 1-based, minimizing -score.
  const double inf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(rows), m = static_cast<std::size_t>(cols);
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = -score(static_cast<Index>(i0 - 1), static_cast<Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

RecoveryScore score_recovery(const std::vector<Vector>& found, const std::vector<Vector>& truth) {
  if (found.empty()) throw InputError("score_recovery needs at least one found vector");
  Matrix cos(static_cast<Index>(found.size()), static_cast<Index>(truth.size()));
  for (std::size_t a = 0; a < found.size(); ++a) {
    for (std::size_t b = 0; b < truth.size(); ++b) {
      cos(static_cast<Index>(a), static_cast<Index>(b)) = found[a].dot(truth[b]) / (found[a].norm() * truth[b].norm());
    }
  }
  const std::vector<int> match = hungarian_max(cos);
  RecoveryScore out;
  for (std::size_t a = 0; a < found.size(); ++a) {
    if (match[a] < 0) continue;
    out.matches.emplace_back(static_cast<int>(a), match[a]);
    out.cosines.push_back(std::abs(cos(static_cast<Index>(a), match[a])));
  }
  double sum = 0.0;
  for (const double c : out.cosines) sum += c;
  out.mean_cosine = out.cosines.empty() ? 0.0 : sum / static_cast<double>(out.cosines.size());
  return out;
}

RecoveryScore score_recovery(const std::vector<ConceptVector>& found, const SyntheticData& data) {
  std::vector<Vector> dirs;
  for (const auto& cv : found) dirs.push_back(cv.direction);
  RecoveryScore out = score_recovery(dirs, data.directions);

  std::vector<Index> truth_sizes(data.directions.size(), 0);
  for (const int t : data.truth) {
    if (t >= 0) ++truth_sizes[static_cast<std::size_t>(t)];
  }
  Index correct = 0, total = 0;
  for (const auto& cv : found) total += cv.member_count();
  for (const auto& [f, t] : out.matches) {
    const auto& cv = found[static_cast<std::size_t>(f)];
    Index hits = 0;
    for (const auto& id : cv.member_ids) hits += truth_label_of(id) == t ? 1 : 0;
    correct += hits;
    out.precision.push_back(cv.member_count() > 0 ? static_cast<double>(hits) / static_cast<double>(cv.member_count()) : 0.0);
    out.recall.push_back(static_cast<double>(hits) / static_cast<double>(truth_sizes[static_cast<std::size_t>(t)]));
  }
  out.overall_precision = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return out;
}

}  // namespace concept_forge
