#ifndef CONCEPT_FORGE_TESTS_HELPERS_HPP
#define CONCEPT_FORGE_TESTS_HELPERS_HPP

#include "concept_forge/activation_store.hpp"
#include "concept_forge/synthetic.hpp"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>

namespace test {

inline concept_forge::RowMatrix to_matrix(const oracle::Points& x) {
  concept_forge::RowMatrix m(static_cast<concept_forge::Index>(x.size()), static_cast<concept_forge::Index>(x[0].size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[0].size(); ++j) m(static_cast<concept_forge::Index>(i), static_cast<concept_forge::Index>(j)) = x[i][j];
  return m;
}

inline concept_forge::ActivationStore make_store(concept_forge::RowMatrix data, const std::string& layer = "test_layer") {
  concept_forge::Manifest m;
  m.layer_name = layer;
  for (concept_forge::Index i = 0; i < data.rows(); ++i) m.images.push_back({"img_" + std::to_string(i), std::nullopt, std::nullopt});
  return concept_forge::ActivationStore(std::move(data), std::move(m));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("concept_forge_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Unit vector with the given nonzero coordinates.
inline concept_forge::Vector sparse_unit(concept_forge::Index d, std::initializer_list<std::pair<concept_forge::Index, double>> entries) {
  concept_forge::Vector v = concept_forge::Vector::Zero(d);
  for (auto [k, x] : entries) v(k) = x;
  return v.normalized();
}

/// Two concepts sharing neuron 0: 0.5 e0 + sqrt(0.75) e1 and 0.5 e0 + sqrt(0.75) e2.
inline concept_forge::SyntheticSpec poly_spec(std::uint64_t seed, double sigma = 0.02, concept_forge::Index d = 16,
                                              concept_forge::Index M = 400) {
  concept_forge::SyntheticSpec spec;
  spec.d = d;
  spec.M = M;
  spec.seed = seed;
  spec.sigma_background = 0.1;
  const double r = std::sqrt(0.75);
  spec.concepts.push_back({sparse_unit(d, {{0, 0.5}, {1, r}}), 0, 60, sigma});
  spec.concepts.push_back({sparse_unit(d, {{0, 0.5}, {2, r}}), 0, 60, sigma});
  return spec;
}

/// One concept on neuron 0 with the same sample budget.
inline concept_forge::SyntheticSpec mono_spec(std::uint64_t seed, double sigma = 0.02, concept_forge::Index d = 16,
                                              concept_forge::Index M = 400) {
  auto spec = poly_spec(seed, sigma, d, M);
  spec.concepts.pop_back();
  spec.concepts[0].count = 120;
  return spec;
}

}  // namespace test

#endif  // CONCEPT_FORGE_TESTS_HELPERS_HPP
