#ifndef CONCEPT_FORGE_NPY_HPP
#define CONCEPT_FORGE_NPY_HPP

#include "concept_forge/types.hpp"

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

namespace concept_forge {

/// Dense C-order tensor widened to double.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const;
};

/// Parses an NPY v1.0 buffer. Accepts little-endian float32/float64 in
/// C order with rank 2 or 4.
Tensor parse_npy(std::string_view bytes);

Tensor load_npy(const std::filesystem::path& path);

/// Serializes a row-major matrix as NPY v1.0 '<f8'. The header is padded so
/// the data block starts on a 64-byte boundary.
std::string encode_npy(const RowMatrix& m);

void save_npy(const std::filesystem::path& path, const RowMatrix& m);

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_NPY_HPP
