#pragma once

// Maximum mean discrepancy with mixtures of Gaussian kernels.
//
// Kernel convention: k_sigma(x, y) = exp(-||x - y||^2 / (2 sigma)). Note the
// bandwidth divides the squared distance directly (no sigma^2).

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gmmn/linalg.hpp"

namespace gmmn {

struct KernelSpec {
  std::vector<double> bandwidths;
  std::vector<double> weights;

  KernelSpec() = default;

  /// Equally weighted mixture (all weights 1).
  explicit KernelSpec(std::vector<double> sigmas)
      : bandwidths(std::move(sigmas)), weights(bandwidths.size(), 1.0) {
    validate();
  }

  KernelSpec(std::vector<double> sigmas, std::vector<double> w)
      : bandwidths(std::move(sigmas)), weights(std::move(w)) {
    validate();
  }

  /// Defaults for [0,1]-valued pixel or code data.
  static KernelSpec pixel_defaults() { return KernelSpec({1.0, 5.0, 10.0, 20.0, 40.0}); }
  /// Defaults for low-dimensional synthetic data.
  static KernelSpec synthetic_defaults() { return KernelSpec({0.5, 1.0, 2.0, 4.0, 8.0}); }

  std::size_t size() const noexcept { return bandwidths.size(); }

  double total_weight() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }

  void validate() const {
    if (bandwidths.empty()) throw ConfigError("KernelSpec: bandwidth list is empty");
    if (weights.size() != bandwidths.size()) {
      throw ConfigError("KernelSpec: " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(bandwidths.size()) + " bandwidths");
    }
    for (double s : bandwidths) {
      if (!(s > 0) || !std::isfinite(s)) throw ConfigError("KernelSpec: bandwidths must be positive");
    }
    for (double w : weights) {
      if (!(w > 0) || !std::isfinite(w)) throw ConfigError("KernelSpec: weights must be positive");
    }
  }
};

/// Biased (V-statistic) MMD^2 and its three constituent means.
template <typename Scalar>
struct MmdResult {
  Scalar mmd2 = 0;
  Scalar term_ss = 0; ///< mean of k(x_s, x_s')
  Scalar term_sd = 0; ///< mean of k(x_s, x_d)
  Scalar term_dd = 0; ///< mean of k(x_d, x_d')
};

template <typename Scalar>
struct MmdValueAndGrad {
  MmdResult<Scalar> value;
  Matrix<Scalar> grad; ///< d mmd2 / d x_s, shaped like x_s
};

template <typename Scalar>
struct SqrtMmdLoss {
  Scalar loss = 0;     ///< sqrt(max(mmd2, 0))
  Matrix<Scalar> grad; ///< d loss / d x_s
  MmdResult<Scalar> parts;
};

namespace detail {

template <typename DerivedS, typename DerivedD>
void check_mmd_operands(const Eigen::MatrixBase<DerivedS>& x_s, const Eigen::MatrixBase<DerivedD>& x_d,
                        const KernelSpec& k) {
  if (x_s.cols() != x_d.cols()) {
    throw ShapeError("mmd: samples " + shape_string(x_s) + " and data " + shape_string(x_d) +
                     " differ in dimension");
  }
  if (x_s.rows() == 0 || x_d.rows() == 0) throw ShapeError("mmd: empty sample set");
  k.validate();
}

// From squared distances, the mixture kernel values and the bandwidth-scaled
// mixture sum_q (w_q / sigma_q) k_q that appears in the gradient.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> kernel_and_slope(const Matrix<Scalar>& sq_dists,
                                                           const KernelSpec& k) {
  Matrix<Scalar> value = Matrix<Scalar>::Zero(sq_dists.rows(), sq_dists.cols());
  Matrix<Scalar> slope = Matrix<Scalar>::Zero(sq_dists.rows(), sq_dists.cols());
  for (std::size_t q = 0; q < k.size(); ++q) {
    const auto sigma = static_cast<Scalar>(k.bandwidths[q]);
    const auto w = static_cast<Scalar>(k.weights[q]);
    const Matrix<Scalar> kq = (-sq_dists.array() / (Scalar(2) * sigma)).exp().matrix();
    value.array() += w * kq.array();
    slope.array() += (w / sigma) * kq.array();
  }
  return {std::move(value), std::move(slope)};
}

template <typename Scalar>
MmdResult<Scalar> combine_terms(Scalar ss, Scalar sd, Scalar dd) {
  return {ss - Scalar(2) * sd + dd, ss, sd, dd};
}

} // namespace detail

/// Mixture kernel between the rows of x and y:
/// K(i, j) = sum_q w_q exp(-||x_i - y_j||^2 / (2 sigma_q)).
template <typename DerivedX, typename DerivedY>
Matrix<typename DerivedX::Scalar> kernel_matrix(const Eigen::MatrixBase<DerivedX>& x,
                                                const Eigen::MatrixBase<DerivedY>& y, const KernelSpec& k) {
  using Scalar = typename DerivedX::Scalar;
  k.validate();
  const Matrix<Scalar> d = pairwise_sq_dists(x, y);
  Matrix<Scalar> out = Matrix<Scalar>::Zero(d.rows(), d.cols());
  for (std::size_t q = 0; q < k.size(); ++q) {
    const auto sigma = static_cast<Scalar>(k.bandwidths[q]);
    out.array() += static_cast<Scalar>(k.weights[q]) * (-d.array() / (Scalar(2) * sigma)).exp();
  }
  return out;
}

/// Biased MMD^2 estimate between generated samples x_s (M rows) and data x_d (N rows).
template <typename DerivedS, typename DerivedD>
MmdResult<typename DerivedS::Scalar> mmd2_biased(const Eigen::MatrixBase<DerivedS>& x_s,
                                                 const Eigen::MatrixBase<DerivedD>& x_d, const KernelSpec& k) {
  using Scalar = typename DerivedS::Scalar;
  detail::check_mmd_operands(x_s, x_d, k);
  const Scalar ss = kernel_matrix(x_s, x_s, k).mean();
  const Scalar sd = kernel_matrix(x_s, x_d, k).mean();
  const Scalar dd = kernel_matrix(x_d, x_d, k).mean();
  return detail::combine_terms(ss, sd, dd);
}

/// MMD^2 together with its gradient with respect to the generated samples:
///
///   dL/dx_s[i] = 2/M^2 sum_j a(x_s[i], x_s[j]) (x_s[j] - x_s[i])
///              - 2/(MN) sum_j a(x_s[i], x_d[j]) (x_d[j] - x_s[i])
///
/// with a = sum_q (w_q / sigma_q) k_q. The pairwise distance matrices are
/// shared across all kernels in the mixture.
template <typename DerivedS, typename DerivedD>
MmdValueAndGrad<typename DerivedS::Scalar> mmd2_value_and_grad(const Eigen::MatrixBase<DerivedS>& x_s,
                                                               const Eigen::MatrixBase<DerivedD>& x_d,
                                                               const KernelSpec& k) {
  using Scalar = typename DerivedS::Scalar;
  detail::check_mmd_operands(x_s, x_d, k);
  const Matrix<Scalar> xs = x_s;
  const Matrix<Scalar> xd = x_d;
  const auto m = static_cast<Scalar>(xs.rows());
  const auto n = static_cast<Scalar>(xd.rows());

  const auto [k_ss, a_ss] = detail::kernel_and_slope(pairwise_sq_dists(xs, xs), k);
  const auto [k_sd, a_sd] = detail::kernel_and_slope(pairwise_sq_dists(xs, xd), k);
  const Scalar dd = kernel_matrix(xd, xd, k).mean();

  MmdValueAndGrad<Scalar> out;
  out.value = detail::combine_terms<Scalar>(k_ss.mean(), k_sd.mean(), dd);

  const Vector<Scalar> row_ss = a_ss.rowwise().sum();
  const Vector<Scalar> row_sd = a_sd.rowwise().sum();
  const Matrix<Scalar> pull_ss = a_ss * xs - row_ss.asDiagonal() * xs;
  const Matrix<Scalar> pull_sd = a_sd * xd - row_sd.asDiagonal() * xs;
  out.grad = (Scalar(2) / (m * m)) * pull_ss - (Scalar(2) / (m * n)) * pull_sd;
  return out;
}

/// Gradient of mmd2_biased with respect to x_s.
template <typename DerivedS, typename DerivedD>
Matrix<typename DerivedS::Scalar> mmd2_grad_samples(const Eigen::MatrixBase<DerivedS>& x_s,
                                                    const Eigen::MatrixBase<DerivedD>& x_d, const KernelSpec& k) {
  return mmd2_value_and_grad(x_s, x_d, k).grad;
}

/// Guard on the square-root loss gradient denominator.
inline constexpr double kSqrtLossEpsilon = 1e-8;

/// L = sqrt(MMD^2) and dL/dx_s = dMMD^2/dx_s / (2 max(L, eps)).
template <typename DerivedS, typename DerivedD>
SqrtMmdLoss<typename DerivedS::Scalar> mmd_sqrt_loss(const Eigen::MatrixBase<DerivedS>& x_s,
                                                     const Eigen::MatrixBase<DerivedD>& x_d, const KernelSpec& k) {
  using Scalar = typename DerivedS::Scalar;
  auto vg = mmd2_value_and_grad(x_s, x_d, k);
  SqrtMmdLoss<Scalar> out;
  out.parts = vg.value;
  out.loss = std::sqrt(std::max(vg.value.mmd2, Scalar(0)));
  const Scalar denom = Scalar(2) * std::max(out.loss, static_cast<Scalar>(kSqrtLossEpsilon));
  out.grad = vg.grad / denom;
  return out;
}

/// Bandwidth list centred (geometrically, factors of 2) on the median
/// pairwise squared distance between distinct rows of x.
template <typename Derived>
std::vector<double> suggest_bandwidths(const Eigen::MatrixBase<Derived>& x, int count = 5) {
  if (count < 1) throw ConfigError("suggest_bandwidths: count must be positive");
  if (x.rows() < 2) throw ShapeError("suggest_bandwidths: need at least two rows");
  const auto d = pairwise_sq_dists(x, x);
  std::vector<double> off;
  off.reserve(static_cast<std::size_t>(d.rows() * (d.rows() - 1) / 2));
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = i + 1; j < d.cols(); ++j) off.push_back(static_cast<double>(d(i, j)));
  }
  const auto mid = off.begin() + static_cast<std::ptrdiff_t>(off.size() / 2);
  std::nth_element(off.begin(), mid, off.end());
  double median = *mid;
  if (!(median > 0)) median = 1.0;
  std::vector<double> out;
  for (int q = 0; q < count; ++q) {
    out.push_back(median * std::exp2(q - (count - 1) / 2.0));
  }
  return out;
}

} // namespace gmmn
