#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace aeroimg {

using Complex = std::complex<double>;

// Points always carry three components; two-dimensional problems keep the
// third component at zero and use (x1, x2) with x2 as the height axis.
using Point = Eigen::Vector3d;

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Input outside an operation's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Evaluation point coincides with a singularity of the kernel.
class CoincidenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or unreadable file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aeroimg
