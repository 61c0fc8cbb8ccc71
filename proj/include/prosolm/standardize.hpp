#pragma once

#include <vector>

#include <Eigen/Dense>

#include "prosolm/error.hpp"

namespace prosolm {

// Per-dimension zero-mean unit-variance scaling. Dimensions with zero
// variance keep stddev 1 and are flagged constant so they pass through
// unshifted in scale.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // every entry > 0
  std::vector<bool> constant_dim;

  Eigen::Index dim() const { return mean.size(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    return (v - mean).cwiseQuotient(stddev);
  }

  Eigen::VectorXd invert(const Eigen::VectorXd& v) const {
    return v.cwiseProduct(stddev) + mean;
  }

  // Rows are observations.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& m) const {
    return (m.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  }

  static Standardizer identity(Eigen::Index dim) {
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(dim);
    s.stddev = Eigen::VectorXd::Ones(dim);
    s.constant_dim.assign(static_cast<std::size_t>(dim), false);
    return s;
  }
};

// Population mean and standard deviation per column of a data matrix
// (rows = observations). Requires at least two rows.
inline Standardizer fit_standardizer(const Eigen::MatrixXd& data) {
  if (data.rows() < 2) {
    throw infeasible_error("fit_standardizer: need at least 2 vectors, got " +
                           std::to_string(data.rows()));
  }
  Standardizer s;
  const auto n = static_cast<double>(data.rows());
  s.mean = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - s.mean.transpose();
  Eigen::VectorXd var = centered.array().square().colwise().sum() / n;
  s.stddev.resize(data.cols());
  s.constant_dim.assign(static_cast<std::size_t>(data.cols()), false);
  for (Eigen::Index d = 0; d < data.cols(); ++d) {
    if (var(d) > 0.0) {
      s.stddev(d) = std::sqrt(var(d));
    } else {
      s.stddev(d) = 1.0;
      s.constant_dim[static_cast<std::size_t>(d)] = true;
    }
  }
  return s;
}

}  // namespace prosolm
