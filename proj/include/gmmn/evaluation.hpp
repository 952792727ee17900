#pragma once

#include <vector>

#include "gmmn/autoencoder.hpp"
#include "gmmn/network.hpp"

namespace gmmn {

/// Isotropic Gaussian kernel density estimate on model samples.
struct ParzenModel {
  MatrixXd centers;
  double sigma = 1.0; ///< per-dimension standard deviation
};

struct LogLikelihood {
  double mean = 0.0;
  double standard_error = 0.0; ///< sample std / sqrt(n)
};

/// log[(1/n) sum_i N(x; c_i, sigma^2 I)] for every row of x, by log-sum-exp.
/// Distances are computed after centring both sets on the centre mean, which
/// keeps the norm expansion accurate for far-from-origin data.
VectorXd parzen_log_density(const ParzenModel& model, const MatrixXd& x);

/// Mean and standard error of parzen_log_density over the rows of x.
LogLikelihood parzen_loglik(const ParzenModel& model, const MatrixXd& x);

struct ParzenSearch {
  ParzenModel model;
  std::vector<double> sigmas;       ///< grid, ascending
  std::vector<double> valid_loglik; ///< mean validation log-likelihood per grid point
};

/// Bandwidth maximising the mean validation log-likelihood; ties go to the
/// smaller sigma. Distances are computed once per validation block and reused
/// across the whole grid.
ParzenSearch parzen_grid_search(const MatrixXd& samples, const MatrixXd& valid, std::vector<double> grid);

/// n logarithmically spaced points from lo to hi inclusive.
std::vector<double> log_spaced_grid(double lo, double hi, int n);

struct Neighbors {
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> indices;
  MatrixXd distances; ///< Euclidean, nondecreasing along each row
};

/// Exhaustive k-nearest-neighbour search of every sample row among the rows
/// of train. Ties are broken by lower train index.
Neighbors nearest_neighbors(const MatrixXd& samples, const MatrixXd& train, Index k);

/// Closed-loop linear path through the anchor rows: each anchor followed by
/// steps_between evenly spaced points toward the next anchor, the last anchor
/// leading back to the first. Row count n_anchors * (steps_between + 1).
MatrixXd interpolation_path(const MatrixXd& anchors, Index steps_between);

/// interpolation_path pushed through the generator (and the decoder, if any).
MatrixXd interpolate_prior(const Network& net, const AutoEncoder* decoder, const MatrixXd& anchors,
                           Index steps_between);

} // namespace gmmn
