// Acceptance checks 1-5 and 7-9. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. The MNIST check lives in acceptance_mnist.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "gmmn/checkpoint.hpp"
#include "gmmn/data_io.hpp"
#include "gmmn/evaluation.hpp"
#include "gmmn/pipeline.hpp"
#include "oracles.hpp"

using namespace gmmn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("criterion %d %s: %s (%s; %.2f s of %.0f s budget)\n", id, title, pass ? "PASS" : "FAIL",
              o.detail.c_str(), secs, budget_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

MatrixXd gaussian(Rng& rng, Index n, Index d, double shift = 0.0) {
  MatrixXd m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  m.col(0).array() += shift;
  return m;
}

KernelSpec random_kernel(Rng& rng) {
  const Index k = 1 + static_cast<Index>(rng.below(4));
  std::vector<double> sigmas, weights;
  for (Index q = 0; q < k; ++q) {
    sigmas.push_back(0.1 + 4.0 * rng.uniform());
    weights.push_back(0.5 + rng.uniform());
  }
  return KernelSpec(sigmas, weights);
}

// --- 1 ----------------------------------------------------------------------------

Outcome mmd_oracle() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Index m = 1 + static_cast<Index>(rng.below(50));
    const Index n = 1 + static_cast<Index>(rng.below(50));
    const Index d = 1 + static_cast<Index>(rng.below(8));
    const KernelSpec k = random_kernel(rng);
    const MatrixXd xs = rng_uniform(rng, m, d, -2.0, 2.0);
    const MatrixXd xd = rng_uniform(rng, n, d, -2.0, 2.0);
    worst = std::max(worst, std::abs(mmd2_biased(xs, xd, k).mmd2 - oracle::mmd2(xs, xd, k)));
  }
  return {worst <= 1e-10, fmt("max abs difference %.3g over 100 trials", worst)};
}

// --- 2 ----------------------------------------------------------------------------

double param_fd_error(const Network& net, const Gradients& g, const std::function<double(const Network&)>& f,
                      double eps) {
  Network probe = net;
  double worst = 0;
  const auto visit = [&](double& p, double analytic) {
    const double orig = p;
    p = orig + eps;
    const double up = f(probe);
    p = orig - eps;
    const double down = f(probe);
    p = orig;
    const double numeric = (up - down) / (2 * eps);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    for (Index i = 0; i < probe.layers[l].weights.size(); ++i) visit(probe.layers[l].weights.data()[i], g.weights[l].data()[i]);
    for (Index i = 0; i < probe.layers[l].bias.size(); ++i) visit(probe.layers[l].bias(i), g.biases[l](i));
  }
  return worst;
}

Outcome gradient_suite() {
  const double eps = 1e-5;
  double worst_a = 0, worst_b = 0, worst_c = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const Index d = 1 + static_cast<Index>(rng.below(6));
    const MatrixXd xs = rng_uniform(rng, 2 + static_cast<Index>(rng.below(10)), d, -1.0, 1.0);
    const MatrixXd xd = rng_uniform(rng, 2 + static_cast<Index>(rng.below(10)), d, -1.0, 1.0);
    const KernelSpec k = random_kernel(rng);

    const MatrixXd g = mmd2_grad_samples(xs, xd, k);
    const MatrixXd fd = oracle::finite_difference([&](const MatrixXd& v) { return oracle::mmd2(v, xd, k); }, xs, eps);
    worst_a = std::max(worst_a, oracle::max_relative_error(g, fd));

    const auto l = mmd_sqrt_loss(xs, xd, k);
    const double m2 = mmd2_biased(xs, xd, k).mmd2;
    const MatrixXd scaled = g / (2.0 * std::sqrt(m2));
    worst_c = std::max(worst_c, (l.grad - scaled).cwiseAbs().maxCoeff());
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(200 + seed);
    const Index h = 2 + static_cast<Index>(rng.below(3));
    const Index d = 2 + static_cast<Index>(rng.below(5));
    // three layers: two ReLU hidden layers and a sigmoid output
    Network net = init_network(mlp_specs(h, {7, 5}, d, Activation::relu, Activation::sigmoid), rng);
    for (auto& layer : net.layers) layer.bias = rng_uniform(rng, 1, layer.bias.size(), -0.3, 0.3);
    const MatrixXd prior = sample_prior(rng, 10, h);
    const MatrixXd data = rng_uniform(rng, 12, d, 0.0, 1.0);
    const KernelSpec k({0.1, 0.5, 1.0});
    const auto trace = forward(net, prior, Mode::eval, rng);
    const auto loss = mmd2_value_and_grad(trace.output(), data, k);
    const Gradients grads = backward(net, trace, loss.grad);
    worst_b = std::max(worst_b, param_fd_error(net, grads, [&](const Network& n) {
                         return oracle::mmd2(oracle::forward(n, prior), data, k);
                       }, eps));
  }
  const bool pass = worst_a < 1e-4 && worst_b < 1e-4 && worst_c <= 1e-12;
  return {pass, fmt("(a) max rel %.3g, (b) max rel %.3g, (c) max abs %.3g", worst_a, worst_b, worst_c)};
}

// --- 3 ----------------------------------------------------------------------------

Outcome two_sample_power() {
  const KernelSpec k({0.5, 1.0, 2.0, 4.0});
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(300 + seed);
    const MatrixXd a = gaussian(rng, 500, 2);
    const MatrixXd shifted = gaussian(rng, 500, 2, 1.0);
    const MatrixXd same = gaussian(rng, 500, 2);
    if (mmd2_biased(a, shifted, k).mmd2 > mmd2_biased(a, same, k).mmd2) ++wins;
  }
  return {wins >= 99, fmt("%.0f/100 seeds separate", wins)};
}

// --- 4 ----------------------------------------------------------------------------

Outcome synthetic_training() {
  Rng rng(0);
  Rng drng = rng.substream("data");
  MatrixXd means(4, 2);
  means << 2, 2, 2, -2, -2, 2, -2, -2;
  const std::vector<double> stds(4, 0.2);
  const MatrixXd data = synth_gaussian_mixture(drng, 1000, means, stds);
  const MatrixXd held = synth_gaussian_mixture(drng, 1000, means, stds);
  Rng init = rng.substream("init");
  Network net = init_network(mlp_specs(2, {32, 32}, 2, Activation::relu, Activation::linear), init);

  TrainConfig cfg;
  cfg.lr = 0.02;
  cfg.momentum = 0.9;
  cfg.minibatch = 200;
  cfg.steps = 2000;
  cfg.kernel = KernelSpec({0.5, 1.0, 2.0, 4.0});
  cfg.loss = LossKind::sqrt_mmd;
  cfg.log_every = 100;
  const TrainReport r = train_gmmn(data, net, cfg, rng, &held);

  bool finite = true;
  for (const auto& e : r.log) finite = finite && std::isfinite(e.loss);
  const double ratio = *r.heldout_mmd / *r.initial_heldout_mmd;

  Rng gen = rng.substream("generate");
  const MatrixXd s = generate(net, nullptr, 10000, gen);
  double worst_z = 0;
  for (Index c = 0; c < 2; ++c) {
    const double dm = data.col(c).mean();
    const double sm = s.col(c).mean();
    const double dv = (data.col(c).array() - dm).square().sum() / static_cast<double>(data.rows() - 1);
    const double sv = (s.col(c).array() - sm).square().sum() / static_cast<double>(s.rows() - 1);
    const double se = std::sqrt(dv / static_cast<double>(data.rows()) + sv / static_cast<double>(s.rows()));
    worst_z = std::max(worst_z, std::abs(sm - dm) / se);
  }
  return {finite && ratio <= 0.2 && worst_z <= 3.0,
          fmt("held-out sqrt MMD ratio %.3f, worst mean offset %.2f SE", ratio, worst_z) +
              (finite ? "" : ", non-finite loss logged")};
}

// --- 5 ----------------------------------------------------------------------------

Outcome parzen_oracle() {
  double worst = 0;
  bool finite = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    const Index d = 1 + static_cast<Index>(rng.below(20));
    const MatrixXd centers = rng_uniform(rng, 5 + static_cast<Index>(rng.below(40)), d, 0.0, 1.0);
    MatrixXd x = rng_uniform(rng, 10, d, 0.0, 1.0);
    const double sigma = 0.05 + 0.5 * rng.uniform();
    // Outliers whose kernel exponents (about -3000 and -8000) underflow a
    // double but not the long double oracle.
    x.row(0).array() += 1.0 + std::sqrt(6000.0 / static_cast<double>(d)) * sigma;
    x.row(1).array() -= std::sqrt(16000.0 / static_cast<double>(d)) * sigma;
    const VectorXd got = parzen_log_density(ParzenModel{centers, sigma}, x);
    const auto want = oracle::parzen_log_density(centers, sigma, x);
    for (Index i = 0; i < x.rows(); ++i) {
      finite = finite && std::isfinite(got(i));
      worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(got(i)) - want[static_cast<std::size_t>(i)])));
    }
  }
  return {finite && worst <= 1e-8, fmt("max abs difference %.3g, outliers finite", worst)};
}

// --- CLI fixtures for 7 and 9 ----------------------------------------------------------

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("gmmn-acceptance-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  std::ostringstream out, e;
  const int code = cli::run_cli(args, out, e);
  if (err) *err = e.str();
  return code;
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// 8x8 images: one random horizontal and one random vertical stroke.
void write_fixture(const fs::path& path, Index n, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd px = rng_uniform(rng, n, 64, 0.0, 0.1);
  for (Index i = 0; i < n; ++i) {
    const Index r = rng.below(8), c = rng.below(8);
    for (Index k = 0; k < 8; ++k) {
      px(i, r * 8 + k) = 0.95;
      px(i, k * 8 + c) = 0.95;
    }
  }
  save_idx_images(path, px, ImageShape{8, 8});
}

std::vector<std::string> data_flags(const fs::path& root) {
  return {"--dataset", "idx", "--train-images", (root / "train.idx").string(), "--test-images",
          (root / "test.idx").string(), "--valid-count", "100", "--seed", "7"};
}

/// Runs every command once; returns the failing command or "".
std::string run_all_commands(const fs::path& root, const fs::path& out) {
  const auto data = data_flags(root);
  const std::string o = out.string();
  const std::string ae = (out / "ae").string();
  const std::vector<std::vector<std::string>> cmds = {
      cat({"train-ae", "--out-dir", ae, "--widths", "32,8", "--pretrain-steps", "50", "--finetune-epochs", "2",
           "--minibatch", "50"},
          data),
      cat({"train-gmmn", "--out-dir", o, "--ae", ae, "--hidden", "32,32", "--prior-dim", "4", "--steps", "100",
           "--minibatch", "100", "--heldout-samples", "100", "--log-every", "20", "--lr", "0.5"},
          data),
      {"sample", "--out-dir", o, "--n", "20", "--seed", "7"},
      cat({"eval", "--out-dir", o, "--n-samples", "500", "--grid-n", "5"}, data),
      {"interpolate", "--out-dir", o, "--anchors", "4", "--steps-between", "5", "--seed", "7"},
      cat({"nn-audit", "--out-dir", o, "--n", "12", "--grid-cols", "6"}, data),
  };
  for (const auto& c : cmds) {
    std::string err;
    if (cli(c, &err) != 0) return c[0] + ": " + err;
  }
  return "";
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file_bytes(e.path());
  }
  return files;
}

// --- 7 ----------------------------------------------------------------------------

Outcome determinism() {
  TempDir tmp("det");
  write_fixture(tmp.path / "train.idx", 600, 1);
  write_fixture(tmp.path / "test.idx", 100, 2);
  std::string failed = run_all_commands(tmp.path, tmp.path / "out");
  if (!failed.empty()) return {false, failed};
  const auto first = snapshot(tmp.path / "out");
  fs::remove_all(tmp.path / "out");
  failed = run_all_commands(tmp.path, tmp.path / "out");
  if (!failed.empty()) return {false, failed};
  const auto second = snapshot(tmp.path / "out");

  // Data-space training on the synthetic set, twice.
  const std::vector<std::string> synth = {"train-gmmn", "--dataset", "gmm2d", "--prior-dim", "2", "--hidden", "32,32",
                                          "--steps", "200", "--lr", "0.02", "--out-dir",
                                          (tmp.path / "synth").string()};
  if (cli(synth) != 0) return {false, "gmm2d train-gmmn failed"};
  const auto s1 = snapshot(tmp.path / "synth");
  fs::remove_all(tmp.path / "synth");
  if (cli(synth) != 0) return {false, "gmm2d train-gmmn failed"};
  const auto s2 = snapshot(tmp.path / "synth");

  std::size_t differing = 0;
  for (const auto& [name, bytes] : first) {
    if (!second.contains(name) || second.at(name) != bytes) ++differing;
  }
  const bool pass = differing == 0 && first.size() == second.size() && s1 == s2;
  return {pass, std::to_string(first.size() + s1.size()) + " artifacts from all 6 commands compared, " +
                    std::to_string(differing) + " differ"};
}

// --- 8 ----------------------------------------------------------------------------

Outcome pipeline_invariants() {
  // frozen autoencoder
  Rng rng(8);
  const MatrixXd data = rng_uniform(rng, 120, 10, 0.0, 1.0);
  const AutoEncoder ae = init_autoencoder(encoder_specs(10, {6, 3}), rng);
  const AutoEncoder before = ae;
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.momentum = 0.9;
  cfg.minibatch = 10;
  cfg.steps = 36;
  cfg.kernel = KernelSpec({0.5, 1.0});
  Network net = init_network(mlp_specs(2, {8}, 3, Activation::relu, Activation::sigmoid), rng);
  std::vector<std::vector<Index>> batches;
  train_gmmn_ae(data, ae, net, cfg, rng, nullptr,
                [&](Index, std::span<const Index> rows) { batches.emplace_back(rows.begin(), rows.end()); });
  const bool frozen = bitwise_equal(ae.encoder, before.encoder) && bitwise_equal(ae.decoder, before.decoder);

  // epoch coverage: 120 rows, minibatch 10 -> 12 batches per epoch, 3 epochs
  bool coverage = batches.size() == 36;
  for (std::size_t epoch = 0; coverage && epoch < 3; ++epoch) {
    std::multiset<Index> seen;
    for (std::size_t b = 0; b < 12; ++b) seen.insert(batches[epoch * 12 + b].begin(), batches[epoch * 12 + b].end());
    coverage = seen.size() == 120 && std::set<Index>(seen.begin(), seen.end()).size() == 120;
  }

  // checkpoint round trip
  TempDir tmp("ckpt");
  int identical = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r(800 + seed);
    const Index depth = 1 + static_cast<Index>(r.below(4));
    std::vector<Index> hidden;
    for (Index l = 0; l < depth; ++l) hidden.push_back(1 + static_cast<Index>(r.below(20)));
    Network n = init_network(mlp_specs(1 + static_cast<Index>(r.below(10)), hidden, 1 + static_cast<Index>(r.below(10)),
                                       Activation::relu, seed % 2 ? Activation::sigmoid : Activation::linear),
                             r);
    for (auto& layer : n.layers) {
      layer.weight_velocity = rng_uniform(r, layer.weights.rows(), layer.weights.cols(), -1.0, 1.0);
      layer.bias = rng_uniform(r, 1, layer.bias.size(), -1.0, 1.0);
    }
    n.update_count = seed * 17;
    Checkpoint c;
    c.component = Component::gmmn;
    c.metadata["seed"] = std::to_string(seed);
    c.network = n;
    const fs::path p = tmp.path / ("n" + std::to_string(seed) + ".ckpt");
    save_checkpoint(p, c);
    const Checkpoint back = load_checkpoint(p);
    save_checkpoint(tmp.path / "again.ckpt", back);
    if (bitwise_equal(back.network, n) && back.metadata == c.metadata &&
        read_file_bytes(p) == read_file_bytes(tmp.path / "again.ckpt")) {
      ++identical;
    }
  }
  return {frozen && coverage && identical == 10,
          std::string("autoencoder ") + (frozen ? "unchanged" : "MODIFIED") + ", epoch coverage " +
              (coverage ? "exact" : "BROKEN") + ", " + std::to_string(identical) + "/10 checkpoints bitwise"};
}

// --- 9 ----------------------------------------------------------------------------

Outcome viewer_artifacts() {
  TempDir tmp("fig");
  write_fixture(tmp.path / "train.idx", 600, 3);
  write_fixture(tmp.path / "test.idx", 100, 4);
  const fs::path o = tmp.path / "out";
  const std::string failed = run_all_commands(tmp.path, o);
  if (!failed.empty()) return {false, failed};

  // interpolate: 4 anchors x (5 + 1) frames, anchor frames bitwise equal to decoded anchors
  const Checkpoint ckpt = load_checkpoint(o / "gmmn.ckpt");
  const AutoEncoder ae = load_autoencoder(o / "ae");
  const MatrixXd anchors = load_matrix(o / "anchors.bin");
  const MatrixXd frames = load_matrix(o / "interpolation.bin");
  const MatrixXd decoded = predict(ae.decoder, predict(ckpt.network, anchors));
  bool endpoints = anchors.rows() == 4 && frames.rows() == 4 * 6 && frames.cols() == 64;
  for (Index a = 0; endpoints && a < 4; ++a) {
    endpoints = std::memcmp(frames.row(a * 6).eval().data(), decoded.row(a).eval().data(), 64 * sizeof(double)) == 0;
  }
  // 6 columns of 8-pixel tiles and 4 rows, 1-pixel separators
  const bool interp_pgm = read_file_bytes(o / "interpolation.pgm").rfind("P5\n53 35\n255\n", 0) == 0;

  // nn-audit: every listed neighbour is the exhaustive-search nearest training image
  const Dataset ds = split_train_valid(load_idx_images(tmp.path / "train.idx").pixels, 100, 7);
  const MatrixXd samples = load_matrix(o / "nn_samples.bin");
  const auto truth = oracle::neighbors(samples, ds.train);
  std::istringstream lines(read_file_bytes(o / "nn_audit.txt"));
  std::string w1, w2, w3;
  Index i = 0, j = 0, matched = 0, listed = 0;
  double d = 0;
  while (lines >> w1 >> i >> w2 >> j >> w3 >> d) {
    ++listed;
    const auto& best = truth[static_cast<std::size_t>(i)][0];
    if (j == best.second && std::abs(d - best.first) <= 1e-12 * std::max(1.0, best.first)) ++matched;
  }
  // 12 samples in 2 bands of 6: 4 tile rows alternating samples and neighbours
  const bool nn_pgm = read_file_bytes(o / "nn_audit.pgm").rfind("P5\n53 35\n255\n", 0) == 0;
  const bool pass = endpoints && interp_pgm && matched == 12 && listed == 12 && nn_pgm;
  return {pass, std::to_string(frames.rows()) + " interpolation frames, anchor frames " +
                    (endpoints ? "bitwise equal" : "DIFFER") + "; " + std::to_string(matched) + "/" +
                    std::to_string(listed) + " nn-audit neighbours exhaustive-exact; grids " +
                    (interp_pgm && nn_pgm ? "well-formed" : "MALFORMED")};
}

} // namespace

int main() {
  criterion(1, "MMD oracle equivalence", 5, mmd_oracle);
  criterion(2, "gradient suite", 30, gradient_suite);
  criterion(3, "two-sample power", 60, two_sample_power);
  criterion(4, "synthetic generative training", 120, synthetic_training);
  criterion(5, "Parzen oracle", 5, parzen_oracle);
  std::printf("criterion 6 MNIST desk scale: see the acceptance_mnist test\n");
  criterion(7, "CLI determinism", 600, determinism);
  criterion(8, "frozen AE, epoch coverage, checkpoint round trip", 60, pipeline_invariants);
  criterion(9, "interpolation and nearest-neighbour artifacts", 600, viewer_artifacts);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
