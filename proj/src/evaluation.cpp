#include "gmmn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gmmn {

namespace {

constexpr Index kBlockRows = 256;

// Squared distances from x rows to the centres, after a shared shift.
MatrixXd centred_sq_dists(const MatrixXd& x, const MatrixXd& centers, const RowVectorXd& shift) {
  return pairwise_sq_dists(x.rowwise() - shift, centers.rowwise() - shift);
}

// log mean_i exp(-d_i / (2 sigma^2)) - (D/2) log(2 pi sigma^2), per row of d.
VectorXd gaussian_log_mean(const MatrixXd& sq_dists, double sigma, Index dim) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const double log_norm = -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi * sigma * sigma) -
                          std::log(static_cast<double>(sq_dists.cols()));
  VectorXd out(sq_dists.rows());
  for (Index i = 0; i < sq_dists.rows(); ++i) {
    const auto row = sq_dists.row(i);
    const double top = -row.minCoeff() * inv;
    const double s = (-row.array() * inv - top).exp().sum();
    out(i) = top + std::log(s) + log_norm;
  }
  return out;
}

void check_model(const ParzenModel& model, const MatrixXd& x) {
  if (model.centers.rows() == 0) throw ConfigError("parzen: no centres");
  if (!(model.sigma > 0.0) || !std::isfinite(model.sigma)) throw ConfigError("parzen: sigma must be positive");
  if (x.cols() != model.centers.cols()) {
    throw ShapeError("parzen: centres " + shape_string(model.centers) + " vs points " + shape_string(x));
  }
}

LogLikelihood summarize(const VectorXd& ll) {
  LogLikelihood out;
  out.mean = pairwise_mean(ll);
  if (ll.size() > 1) {
    const VectorXd sq = (ll.array() - out.mean).square().matrix();
    const double var = pairwise_mean(sq) * static_cast<double>(ll.size()) / static_cast<double>(ll.size() - 1);
    out.standard_error = std::sqrt(var / static_cast<double>(ll.size()));
  }
  return out;
}

} // namespace

VectorXd parzen_log_density(const ParzenModel& model, const MatrixXd& x) {
  check_model(model, x);
  const RowVectorXd shift = model.centers.colwise().mean();
  VectorXd out(x.rows());
  for (Index begin = 0; begin < x.rows(); begin += kBlockRows) {
    const Index n = std::min(kBlockRows, x.rows() - begin);
    const MatrixXd d = centred_sq_dists(x.middleRows(begin, n), model.centers, shift);
    out.segment(begin, n) = gaussian_log_mean(d, model.sigma, x.cols());
  }
  return out;
}

LogLikelihood parzen_loglik(const ParzenModel& model, const MatrixXd& x) {
  if (x.rows() == 0) throw ShapeError("parzen_loglik: no test points");
  return summarize(parzen_log_density(model, x));
}

ParzenSearch parzen_grid_search(const MatrixXd& samples, const MatrixXd& valid, std::vector<double> grid) {
  if (grid.empty()) throw ConfigError("parzen_grid_search: empty sigma grid");
  for (double s : grid) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("parzen_grid_search: sigmas must be positive");
  }
  if (valid.rows() == 0) throw ShapeError("parzen_grid_search: empty validation set");
  std::sort(grid.begin(), grid.end());
  check_model(ParzenModel{samples, grid.front()}, valid);

  const RowVectorXd shift = samples.colwise().mean();
  MatrixXd ll(static_cast<Index>(grid.size()), valid.rows());
  for (Index begin = 0; begin < valid.rows(); begin += kBlockRows) {
    const Index n = std::min(kBlockRows, valid.rows() - begin);
    const MatrixXd d = centred_sq_dists(valid.middleRows(begin, n), samples, shift);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      ll.row(static_cast<Index>(g)).segment(begin, n) = gaussian_log_mean(d, grid[g], valid.cols()).transpose();
    }
  }

  ParzenSearch out;
  out.sigmas = grid;
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.valid_loglik.push_back(pairwise_mean(ll.row(static_cast<Index>(g))));
    if (out.valid_loglik[g] > out.valid_loglik[best]) best = g;
  }
  out.model = ParzenModel{samples, grid[best]};
  return out;
}

std::vector<double> log_spaced_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw ConfigError("log_spaced_grid: need 0 < lo <= hi and n >= 1");
  std::vector<double> out;
  if (n == 1) return {lo};
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) out.push_back(i == n - 1 ? hi : lo * std::exp(step * i));
  return out;
}

Neighbors nearest_neighbors(const MatrixXd& samples, const MatrixXd& train, Index k) {
  if (samples.cols() != train.cols()) {
    throw ShapeError("nearest_neighbors: samples " + shape_string(samples) + " vs train " + shape_string(train));
  }
  if (k < 1 || k > train.rows()) {
    throw ConfigError("nearest_neighbors: k = " + std::to_string(k) + " but train has " +
                      std::to_string(train.rows()) + " rows");
  }
  Neighbors out;
  out.indices.resize(samples.rows(), k);
  out.distances.resize(samples.rows(), k);
  std::vector<double> sq(static_cast<std::size_t>(train.rows()));
  std::vector<Index> order(static_cast<std::size_t>(train.rows()));
  for (Index i = 0; i < samples.rows(); ++i) {
    for (Index j = 0; j < train.rows(); ++j) {
      double s = 0.0;
      for (Index p = 0; p < train.cols(); ++p) {
        const double diff = samples(i, p) - train(j, p);
        s += diff * diff;
      }
      sq[static_cast<std::size_t>(j)] = s;
    }
    std::iota(order.begin(), order.end(), Index{0});
    auto closer = [&](Index a, Index b) {
      const double da = sq[static_cast<std::size_t>(a)];
      const double db = sq[static_cast<std::size_t>(b)];
      return da < db || (da == db && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
    for (Index c = 0; c < k; ++c) {
      const Index j = order[static_cast<std::size_t>(c)];
      out.indices(i, c) = j;
      out.distances(i, c) = std::sqrt(sq[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

MatrixXd interpolation_path(const MatrixXd& anchors, Index steps_between) {
  if (anchors.rows() < 1) throw ConfigError("interpolation: need at least one anchor");
  if (steps_between < 0) throw ConfigError("interpolation: steps_between must be non-negative");
  const Index n = anchors.rows();
  MatrixXd out(n * (steps_between + 1), anchors.cols());
  Index row = 0;
  for (Index a = 0; a < n; ++a) {
    const auto from = anchors.row(a);
    const auto to = anchors.row((a + 1) % n);
    for (Index s = 0; s <= steps_between; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(steps_between + 1);
      out.row(row++) = (1.0 - t) * from + t * to;
    }
  }
  return out;
}

MatrixXd interpolate_prior(const Network& net, const AutoEncoder* decoder, const MatrixXd& anchors,
                           Index steps_between) {
  if (anchors.cols() != net.input_dim()) {
    throw ShapeError("interpolate_prior: anchors " + shape_string(anchors) + " but prior dim is " +
                     std::to_string(net.input_dim()));
  }
  if (decoder != nullptr && decoder->decoder.input_dim() != net.output_dim()) {
    throw ShapeError("interpolate_prior: generator/decoder dimension mismatch");
  }
  MatrixXd out = predict(net, interpolation_path(anchors, steps_between));
  if (decoder != nullptr) out = predict(decoder->decoder, out);
  return out;
}

} // namespace gmmn
