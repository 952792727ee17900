#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gmmn/evaluation.hpp"
#include "oracles.hpp"

using namespace gmmn;

namespace {

MatrixXd gaussian(Rng& rng, Index n, Index d, double scale) {
  MatrixXd m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double gaussian_mode(Index d, double sigma) {
  return -0.5 * static_cast<double>(d) * std::log(2 * std::numbers::pi * sigma * sigma);
}

} // namespace

TEST_CASE("parzen_loglik: single centre at its mode") {
  Rng rng(1);
  const MatrixXd c = rng_uniform(rng, 1, 5, 0.0, 1.0);
  const auto ll = parzen_loglik({c, 0.3}, c);
  CHECK(ll.mean == doctest::Approx(gaussian_mode(5, 0.3)).epsilon(1e-13));
  CHECK(ll.standard_error == 0.0);
}

TEST_CASE("parzen_loglik: two symmetric centres") {
  MatrixXd centers(2, 3), x(1, 3);
  centers << 1, 2, 3, 1, 2, 5;
  x << 1, 2, 4;
  const double sigma = 0.8;
  const auto ll = parzen_loglik({centers, sigma}, x);
  CHECK(ll.mean == doctest::Approx(gaussian_mode(3, sigma) - 1.0 / (2 * sigma * sigma)).epsilon(1e-13));
}

TEST_CASE("parzen_log_density: matches the extended-precision direct sum") {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Index d = 1 + static_cast<Index>(rng.below(10));
    const MatrixXd centers = rng_uniform(rng, 30 + static_cast<Index>(rng.below(300)), d, 0.0, 1.0);
    MatrixXd x = rng_uniform(rng, 20, d, -0.5, 1.5);
    x.row(0).setConstant(6.0); // far outlier
    const double sigma = rng.uniform(0.05, 0.5);
    const VectorXd got = parzen_log_density({centers, sigma}, x);
    const auto ref = oracle::parzen_log_density(centers, sigma, x);
    for (Index i = 0; i < x.rows(); ++i) {
      REQUIRE(std::isfinite(got(i)));
      worst = std::max(worst, static_cast<double>(std::abs(got(i) - ref[static_cast<std::size_t>(i)])));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("parzen_log_density: no overflow for tiny sigma and 784 dimensions") {
  Rng rng(2);
  const MatrixXd centers = rng_uniform(rng, 50, 784, 0.0, 1.0);
  MatrixXd x = rng_uniform(rng, 4, 784, 0.0, 1.0);
  x.row(1).setConstant(50.0);
  x.row(2) = centers.row(3);
  const VectorXd ll = parzen_log_density({centers, 1e-3}, x);
  CHECK(all_finite(ll));
  CHECK(ll(2) == doctest::Approx(gaussian_mode(784, 1e-3) - std::log(50.0)).epsilon(1e-12));
}

TEST_CASE("parzen_loglik: permutation invariance") {
  Rng rng(3);
  const MatrixXd centers = rng_uniform(rng, 40, 4, 0.0, 1.0);
  const MatrixXd x = rng_uniform(rng, 25, 4, 0.0, 1.0);
  const auto base = parzen_loglik({centers, 0.2}, x);

  MatrixXd c2 = centers;
  MatrixXd x2 = x;
  auto pc = rng.permutation(40);
  auto px = rng.permutation(25);
  for (Index i = 0; i < 40; ++i) c2.row(i) = centers.row(pc[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < 25; ++i) x2.row(i) = x.row(px[static_cast<std::size_t>(i)]);
  const auto pcen = parzen_loglik({c2, 0.2}, x);
  const auto prow = parzen_loglik({centers, 0.2}, x2);
  CHECK(pcen.mean == base.mean);
  CHECK(prow.mean == base.mean);
}

TEST_CASE("parzen_loglik: standard error is sample std over sqrt(n)") {
  Rng rng(4);
  const MatrixXd centers = rng_uniform(rng, 10, 2, 0.0, 1.0);
  const MatrixXd x = rng_uniform(rng, 30, 2, 0.0, 1.0);
  const VectorXd ll = parzen_log_density({centers, 0.3}, x);
  const double mean = ll.mean();
  const double sd = std::sqrt((ll.array() - mean).square().sum() / 29.0);
  const auto r = parzen_loglik({centers, 0.3}, x);
  CHECK(r.mean == doctest::Approx(mean).epsilon(1e-13));
  CHECK(r.standard_error == doctest::Approx(sd / std::sqrt(30.0)).epsilon(1e-12));
  CHECK_THROWS_AS((void)parzen_loglik({centers, 0.3}, MatrixXd(2, 3)), ShapeError);
  CHECK_THROWS_AS((void)parzen_loglik({centers, 0.0}, x), ConfigError);
}

TEST_CASE("parzen_grid_search: singleton, exhaustive maximum, errors") {
  Rng rng(5);
  const MatrixXd s = rng_uniform(rng, 60, 3, 0.0, 1.0);
  const MatrixXd v = rng_uniform(rng, 40, 3, 0.0, 1.0);
  CHECK(parzen_grid_search(s, v, {0.37}).model.sigma == 0.37);

  const auto grid = log_spaced_grid(0.01, 1.0, 20);
  REQUIRE(grid.size() == 20);
  CHECK(grid.front() == doctest::Approx(0.01));
  CHECK(grid.back() == doctest::Approx(1.0));
  const auto search = parzen_grid_search(s, v, grid);
  double best = -INFINITY;
  double best_sigma = 0;
  for (double g : grid) {
    const double m = parzen_loglik({s, g}, v).mean;
    if (m > best) {
      best = m;
      best_sigma = g;
    }
  }
  CHECK(search.model.sigma == best_sigma);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(search.valid_loglik[i] == doctest::Approx(parzen_loglik({s, grid[i]}, v).mean).epsilon(1e-12));
  }
  CHECK_THROWS_AS((void)parzen_grid_search(s, v, {}), ConfigError);
  CHECK_THROWS_AS((void)parzen_grid_search(s, v, {0.1, -1.0}), ConfigError);
}

TEST_CASE("parzen_grid_search: duplicate grid points resolve to the first") {
  MatrixXd s(1, 1), v(1, 1);
  s << 0.0;
  v << 0.25;
  const auto r = parzen_grid_search(s, v, {2.0, 0.5, 0.5, 2.0});
  CHECK(r.model.sigma == 0.5);
  CHECK(r.sigmas == std::vector<double>{0.5, 0.5, 2.0, 2.0});
}

// In one or two dimensions the likelihood-optimal bandwidth at n = 1000 is
// near 0.3 s, so the grid picks s/4 there; from four dimensions up it is s.
TEST_CASE("parzen_grid_search: recovers the generating scale") {
  for (Index d : {4, 8}) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const double scale = 0.5;
      const MatrixXd s = gaussian(rng, 1000, d, scale);
      const MatrixXd v = gaussian(rng, 1000, d, scale);
      const auto r = parzen_grid_search(s, v, {scale / 4, scale, 4 * scale});
      hits += r.model.sigma == scale;
    }
    CHECK(hits == 20);
  }
}

TEST_CASE("nearest_neighbors: exact match, full ordering, oracle") {
  Rng rng(6);
  const MatrixXd base = rng_uniform(rng, 50, 5, 0.0, 1.0);
  const MatrixXd q = rng_uniform(rng, 10, 5, 0.0, 1.0);

  const Neighbors exact = nearest_neighbors(base.row(17), base, 3);
  CHECK(exact.indices(0, 0) == 17);
  CHECK(exact.distances(0, 0) == 0.0);

  const Neighbors all = nearest_neighbors(q, base, 50);
  for (Index i = 0; i < q.rows(); ++i) {
    std::vector<Index> idx(all.indices.row(i).data(), all.indices.row(i).data() + 50);
    std::sort(idx.begin(), idx.end());
    for (Index j = 0; j < 50; ++j) CHECK(idx[static_cast<std::size_t>(j)] == j);
    for (Index j = 1; j < 50; ++j) CHECK(all.distances(i, j - 1) <= all.distances(i, j));
  }

  const auto ref = oracle::neighbors(q, base);
  const Neighbors nn = nearest_neighbors(q, base, 7);
  for (Index i = 0; i < q.rows(); ++i) {
    for (Index j = 0; j < 7; ++j) {
      CHECK(nn.indices(i, j) == ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].second);
      CHECK(nn.distances(i, j) == ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].first);
    }
  }
  CHECK_THROWS_AS((void)nearest_neighbors(q, base, 51), ConfigError);
  CHECK_THROWS_AS((void)nearest_neighbors(q, MatrixXd(4, 2), 1), ShapeError);
}

TEST_CASE("nearest_neighbors: ties go to the lower index") {
  MatrixXd base(4, 1), q(1, 1);
  base << 2, 0, -2, 0;
  q << 0;
  const Neighbors nn = nearest_neighbors(q, base, 4);
  CHECK(nn.indices(0, 0) == 1);
  CHECK(nn.indices(0, 1) == 3);
  CHECK(nn.indices(0, 2) == 0);
  CHECK(nn.indices(0, 3) == 2);
}

TEST_CASE("interpolation_path: closed loop layout") {
  MatrixXd anchors(2, 2);
  anchors << -1, 0.5, 0.25, -0.75;
  const MatrixXd p0 = interpolation_path(anchors, 0);
  CHECK(p0 == anchors);

  const MatrixXd p1 = interpolation_path(anchors, 1);
  REQUIRE(p1.rows() == 4);
  CHECK(p1.row(0) == anchors.row(0));
  CHECK(p1.row(1) == (0.5 * (anchors.row(0) + anchors.row(1))));
  CHECK(p1.row(2) == anchors.row(1));
  CHECK(p1.row(3) == (0.5 * (anchors.row(1) + anchors.row(0))));

  Rng rng(7);
  const MatrixXd a5 = rng_uniform(rng, 5, 3, -1.0, 1.0);
  const MatrixXd p = interpolation_path(a5, 4);
  CHECK(p.rows() == 25);
  for (Index a = 0; a < 5; ++a) CHECK(p.row(5 * a) == a5.row(a));
  CHECK_THROWS_AS((void)interpolation_path(MatrixXd(0, 3), 2), ConfigError);
}

TEST_CASE("interpolate_prior: endpoints equal decoded anchors bitwise, sigmoid range") {
  Rng rng(8);
  const Network net = init_network(mlp_specs(3, {10}, 4, Activation::relu, Activation::sigmoid), rng);
  const AutoEncoder ae = init_autoencoder(encoder_specs(9, {6, 4}), rng);
  const MatrixXd anchors = sample_prior(rng, 5, 3);
  const MatrixXd frames = interpolate_prior(net, &ae, anchors, 3);
  REQUIRE(frames.rows() == 20);
  REQUIRE(frames.cols() == 9);
  const MatrixXd decoded = decode(ae, predict(net, anchors));
  for (Index a = 0; a < 5; ++a) CHECK(frames.row(4 * a) == decoded.row(a));
  CHECK(frames.minCoeff() > 0.0);
  CHECK(frames.maxCoeff() < 1.0);

  const MatrixXd plain = interpolate_prior(net, nullptr, anchors, 0);
  CHECK(plain == predict(net, anchors));
  CHECK_THROWS_AS((void)interpolate_prior(net, nullptr, MatrixXd(2, 5), 1), ShapeError);
}
