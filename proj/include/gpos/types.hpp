#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gpos {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Shape of an argument does not match the space it is used in.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the domain of an operation (t <= 0, non-PSD covariance, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A computation produced a non-finite value, failed to bracket, or hit a cap.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace gpos
