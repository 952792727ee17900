#pragma once

// Dense linear algebra and seeded randomness shared by every other module.
//
// Conventions: matrices are row-major and rows are examples. Everything is
// templated on the scalar type; the library itself instantiates double.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gmmn/errors.hpp"

namespace gmmn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using RowVectorXd = RowVector<double>;
using VectorXd = Vector<double>;

std::string shape_string(Index rows, Index cols);

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().allFinite();
}

/// Seedable 64-bit generator (std::mt19937_64) with platform-stable
/// conversions to floating point. Sub-streams derive child generators from
/// the seed and a name, so a component's draws do not depend on how many
/// numbers another component consumed.
class Rng {
public:
  static constexpr std::string_view algorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent generator keyed by (seed, name). Does not advance *this.
  Rng substream(std::string_view name) const;

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Random permutation of 0..n-1.
  std::vector<Index> permutation(Index n);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_;
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Standard matrix product. Throws ShapeError naming both shapes.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a) + " by " + shape_string(b));
  }
  using Scalar = typename DerivedA::Scalar;
  const Matrix<Scalar> ae = a;
  const Matrix<Scalar> be = b;
  // Each entry is summed over k in ascending order, the same order as a plain
  // triple loop, so results are reproducible bit for bit.
  Matrix<Scalar> out = Matrix<Scalar>::Zero(ae.rows(), be.cols());
  for (Index i = 0; i < ae.rows(); ++i) {
    for (Index k = 0; k < ae.cols(); ++k) out.row(i) += ae(i, k) * be.row(k);
  }
  return out;
}

namespace detail {

// Total order on matrices: shape first, then values lexicographically.
// Returns <0, 0, >0. NaNs compare as unordered and fall through as "equal".
template <typename DerivedA, typename DerivedB>
int compare_matrices(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows() ? -1 : 1;
  if (a.cols() != b.cols()) return a.cols() < b.cols() ? -1 : 1;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) < b(i, j)) return -1;
      if (b(i, j) < a(i, j)) return 1;
    }
  }
  return 0;
}

} // namespace detail

/// Squared Euclidean distances between the rows of x and the rows of y,
/// via ||x||^2 + ||y||^2 - 2 x.y clamped at zero.
///
/// The cross term is always computed with the operands in a canonical order,
/// so D(x, y)^T == D(y, x) bitwise, and when x == y the diagonal is exactly 0.
template <typename DerivedX, typename DerivedY>
Matrix<typename DerivedX::Scalar> pairwise_sq_dists(const Eigen::MatrixBase<DerivedX>& x,
                                                    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.cols() != y.cols()) {
    throw ShapeError("pairwise_sq_dists: column mismatch between " + shape_string(x) + " and " +
                     shape_string(y));
  }
  const Matrix<Scalar> xe = x;
  const Matrix<Scalar> ye = y;
  const int order = detail::compare_matrices(xe, ye);

  Matrix<Scalar> cross(xe.rows(), ye.rows());
  if (order <= 0) {
    cross.noalias() = xe * ye.transpose();
  } else {
    Matrix<Scalar> swapped(ye.rows(), xe.rows());
    swapped.noalias() = ye * xe.transpose();
    cross = swapped.transpose();
  }

  const Vector<Scalar> x_norms = xe.rowwise().squaredNorm();
  const Vector<Scalar> y_norms = ye.rowwise().squaredNorm();
  Matrix<Scalar> out(xe.rows(), ye.rows());
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      const Scalar d = (x_norms(i) + y_norms(j)) - Scalar(2) * cross(i, j);
      out(i, j) = d > Scalar(0) ? d : Scalar(0);
    }
  }
  if (order == 0) out.diagonal().setZero();
  return out;
}

/// rows x cols matrix of i.i.d. draws from U[lo, hi).
template <typename Scalar = double>
Matrix<Scalar> rng_uniform(Rng& rng, Index rows, Index cols, Scalar lo, Scalar hi) {
  if (!(lo < hi)) throw ConfigError("rng_uniform: need lo < hi");
  if (rows < 0 || cols < 0) throw ConfigError("rng_uniform: negative dimension");
  Matrix<Scalar> out(rows, cols);
  for (Index i = 0; i < out.size(); ++i) {
    Scalar v = static_cast<Scalar>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    // Rounding into a narrower Scalar may land on hi.
    if (!(v < hi)) v = lo;
    out.data()[i] = v;
  }
  return out;
}

/// Pairwise (cascade) summation: deterministic and order-independent of any
/// threading, with O(log n) error growth.
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> values) {
  constexpr std::size_t leaf = 8;
  if (values.size() <= leaf) {
    Scalar s = 0;
    for (Scalar v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

template <typename Derived>
typename Derived::Scalar pairwise_mean(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> flat = v.reshaped();
  return pairwise_sum(std::span<const Scalar>(flat.data(), static_cast<std::size_t>(flat.size()))) /
         static_cast<Scalar>(flat.size());
}

} // namespace gmmn
