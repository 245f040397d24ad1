#include "concept_forge/ward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace concept_forge {

namespace {

void validate_distances(const Matrix& D) {
  if (D.rows() != D.cols()) throw InputError("distance matrix must be square");
  if (D.rows() < 2) throw InputError("ward_agglomerate needs at least two points");
  if (!D.allFinite()) throw InputError("distance matrix has non-finite entries");
  const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
  for (Index i = 0; i < D.rows(); ++i) {
    if (D(i, i) != 0.0) throw InputError("distance matrix diagonal must be zero");
    for (Index j = i + 1; j < D.cols(); ++j) {
      if (D(i, j) < 0.0 || D(j, i) < 0.0) throw InputError("distance matrix has negative entries");
      if (std::abs(D(i, j) - D(j, i)) > 1e-12 * scale) throw InputError("distance matrix is not symmetric");
    }
  }
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

Dendrogram ward_agglomerate(const Matrix& D) {
  validate_distances(D);
  const Index n = D.rows();

  // Working linkages live in slots; slot s holds cluster ids[s].
  Matrix link = D;
  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::vector<Index> sizes(static_cast<std::size_t>(n), 1);
  std::vector<Index> active(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index{0});
  std::iota(active.begin(), active.end(), Index{0});

  Dendrogram dgm;
  dgm.leaves = n;
  dgm.merges.reserve(static_cast<std::size_t>(n - 1));

  for (Index step = 0; step < n - 1; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<Index, Index> best_ids{n * 2, n * 2};
    std::size_t bi = 0, bj = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const Index si = active[a], sj = active[b];
        const double h = link(si, sj);
        const std::pair<Index, Index> key = std::minmax(ids[si], ids[sj]);
        if (h < best || (h == best && key < best_ids)) {
          best = h;
          best_ids = {key.first, key.second};
          bi = a;
          bj = b;
        }
      }
    }

    const Index si = active[bi], sj = active[bj];
    const auto ni = static_cast<double>(sizes[si]);
    const auto nj = static_cast<double>(sizes[sj]);
    const double dij2 = best * best;
    for (const Index sk : active) {
      if (sk == si || sk == sj) continue;
      const auto nk = static_cast<double>(sizes[sk]);
      const double dik = link(si, sk), djk = link(sj, sk);
      const double radicand = ((ni + nk) * dik * dik + (nj + nk) * djk * djk - nk * dij2) / (ni + nj + nk);
      const double updated = std::sqrt(std::max(radicand, 0.0));
      link(si, sk) = updated;
      link(sk, si) = updated;
    }

    // Ward is monotone; anything beyond rounding noise means a broken update.
    double height = best;
    if (!dgm.merges.empty() && height < dgm.merges.back().height) {
      const double prev = dgm.merges.back().height;
      if (prev - height > 1e-12 * std::max(1.0, prev)) {
        throw std::logic_error("ward_agglomerate: merge heights decreased");
      }
      height = prev;
    }

    sizes[si] += sizes[sj];
    dgm.merges.push_back({best_ids.first, best_ids.second, height, sizes[si]});
    ids[si] = n + step;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return dgm;
}

namespace {

/// Applies merges below the threshold and returns the union-find over leaves.
UnionFind apply_merges(const Dendrogram& dgm, double d_max) {
  if (!(d_max > 0.0)) throw InputError("d_max must be positive");
  const auto n = static_cast<std::size_t>(dgm.leaves);
  UnionFind uf(n);
  // A representative leaf for every node id.
  std::vector<std::size_t> leaf_of(n + dgm.merges.size());
  std::iota(leaf_of.begin(), leaf_of.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
  for (std::size_t k = 0; k < dgm.merges.size(); ++k) {
    const auto& m = dgm.merges[k];
    leaf_of[n + k] = leaf_of[static_cast<std::size_t>(m.left)];
    if (m.height < d_max) uf.unite(leaf_of[static_cast<std::size_t>(m.left)], leaf_of[static_cast<std::size_t>(m.right)]);
  }
  return uf;
}

}  // namespace

Partition cut_dendrogram(const Dendrogram& dgm, double d_max) {
  UnionFind uf = apply_merges(dgm, d_max);
  const auto n = static_cast<std::size_t>(dgm.leaves);
  Partition p;
  p.labels.assign(n, -1);
  std::vector<int> label_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = uf.find(i);
    if (label_of_root[root] < 0) label_of_root[root] = p.count++;
    p.labels[i] = label_of_root[root];
  }
  return p;
}

int cluster_count(const Dendrogram& dgm, double d_max) { return cut_dendrogram(dgm, d_max).count; }

double round_significant(double value, int digits) {
  if (value == 0.0 || !std::isfinite(value)) return value;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

nlohmann::json dendrogram_to_json(const Dendrogram& dgm) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : dgm.merges) {
    merges.push_back({m.left, m.right, round_significant(m.height, 12), m.size});
  }
  return {{"leaves", dgm.leaves}, {"merges", std::move(merges)}};
}

Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram dgm;
  try {
    dgm.leaves = j.at("leaves").get<Index>();
    for (const auto& m : j.at("merges")) {
      dgm.merges.push_back({m.at(0).get<Index>(), m.at(1).get<Index>(), m.at(2).get<double>(), m.at(3).get<Index>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed dendrogram JSON: ") + e.what());
  }
  if (dgm.leaves < 1 || static_cast<Index>(dgm.merges.size()) != dgm.leaves - 1) {
    throw InputError("dendrogram must have exactly leaves-1 merges");
  }
  for (std::size_t k = 0; k < dgm.merges.size(); ++k) {
    const auto& m = dgm.merges[k];
    const Index limit = dgm.leaves + static_cast<Index>(k);
    if (m.left < 0 || m.right < 0 || m.left >= limit || m.right >= limit) {
      throw InputError("dendrogram merge references an unknown node");
    }
  }
  return dgm;
}

}  // namespace concept_forge
