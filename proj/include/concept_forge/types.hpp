#ifndef CONCEPT_FORGE_TYPES_HPP
#define CONCEPT_FORGE_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace concept_forge {

/// Row-major dense matrix; one embedding per row, matching NPY C-order.
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrix = RowMatrixX<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Index = Eigen::Index;

/// Base of every error the library raises on bad inputs or bad data.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-side contract violations: bad parameters, mismatched shapes, etc.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Row count of the activations disagrees with the manifest, or the pooling
/// flag disagrees with the tensor rank.
class ManifestMismatch : public InputError {
 public:
  using InputError::InputError;
};

/// Problems with the content of a data file.
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace concept_forge

#endif  // CONCEPT_FORGE_TYPES_HPP
