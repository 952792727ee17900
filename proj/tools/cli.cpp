#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gmmn/checkpoint.hpp"
#include "gmmn/data_io.hpp"
#include "gmmn/evaluation.hpp"
#include "gmmn/format.hpp"
#include "gmmn/pipeline.hpp"

namespace gmmn::cli {

namespace fs = std::filesystem;

namespace {

struct Key {
  std::string name;
  std::string value; ///< default
  std::string help;
};

// --- schema ------------------------------------------------------------------

std::vector<Key> common_keys() {
  return {
      {"seed", "0", "master seed; every random stream derives from it"},
      {"out_dir", "out", "directory for all artifacts"},
      {"data_dir", "data/mnist", "directory holding the MNIST IDX files (dataset=mnist)"},
  };
}

std::vector<Key> dataset_keys() {
  return {
      {"dataset", "mnist", "mnist | idx | gmm2d"},
      {"train_images", "", "IDX image file for training (dataset=idx)"},
      {"test_images", "", "IDX image file for testing (dataset=idx)"},
      {"valid_count", "1000", "rows held out for validation (dataset=idx)"},
      {"train_limit", "0", "use only the first N training rows (0 = all)"},
      {"test_limit", "0", "use only the first N test rows (0 = all)"},
      {"gmm_n", "1000", "training points (dataset=gmm2d)"},
      {"gmm_std", "0.2", "component standard deviation (dataset=gmm2d)"},
  };
}

std::vector<Key> model_keys() {
  return {
      {"gmmn", "", "GMMN checkpoint (default <out_dir>/gmmn.ckpt)"},
      {"ae", "", "autoencoder directory (default: the one recorded in the GMMN checkpoint)"},
  };
}

struct Command {
  std::string name;
  std::string help;
  std::vector<Key> keys;
};

std::vector<Key> join(std::initializer_list<std::vector<Key>> parts) {
  std::vector<Key> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<Command> commands() {
  return {
      {"train-ae", "layer-wise pretraining and fine-tuning of a sigmoid autoencoder",
       join({common_keys(), dataset_keys(),
             {
                 {"widths", "1024,32", "encoder layer widths; the last is the code dimension"},
                 {"pretrain_steps", "2000", "minibatch steps per pretraining stage"},
                 {"pretrain_lr", "0.01", "pretraining learning rate"},
                 {"finetune_epochs", "10", "fine-tuning epochs"},
                 {"lr", "0.01", "fine-tuning learning rate"},
                 {"momentum", "0.9", "momentum"},
                 {"minibatch", "100", "minibatch size"},
                 {"dropout", "0.1", "dropout rate on encoder layer outputs"},
             }})},
      {"train-gmmn", "minibatch MMD training in data space or (with --ae) in code space",
       join({common_keys(), dataset_keys(),
             {
                 {"ae", "", "autoencoder directory; enables code-space training"},
                 {"prior_dim", "10", "dimension of the uniform prior"},
                 {"hidden", "64,256,256,1024", "hidden layer widths"},
                 {"hidden_activation", "relu", "relu | sigmoid | linear"},
                 {"output_activation", "", "default sigmoid (linear for gmm2d)"},
                 {"lr", "0.1", "learning rate"},
                 {"momentum", "0.9", "momentum"},
                 {"minibatch", "200", "data minibatch size (= generated samples per step)"},
                 {"steps", "5000", "training steps"},
                 {"sigmas", "", "kernel bandwidths (default 1,5,10,20,40 for pixels, 0.25,0.5,1,2,4 for codes, 0.5,1,2,4,8 for gmm2d)"},
                 {"kernel_weights", "", "kernel weights (default all 1)"},
                 {"loss", "sqrt_mmd", "sqrt_mmd | mmd2"},
                 {"dropout", "0", "dropout rate on hidden layers"},
                 {"log_every", "100", "loss telemetry interval"},
                 {"heldout_samples", "1000", "validation rows used for held-out MMD"},
                 {"patience", "0", "early stopping patience in log intervals (0 = off)"},
             }})},
      {"sample", "draw samples from a trained model",
       join({common_keys(), model_keys(),
             {
                 {"n", "100", "number of samples"},
                 {"grid_cols", "10", "columns of the PGM grid"},
             }})},
      {"eval", "Parzen-window test log-likelihood with a validation bandwidth search",
       join({common_keys(), dataset_keys(), model_keys(),
             {
                 {"n_samples", "10000", "model samples used as Parzen centres"},
                 {"grid_lo", "0.01", "smallest bandwidth of the search grid"},
                 {"grid_hi", "1", "largest bandwidth of the search grid"},
                 {"grid_n", "20", "log-spaced grid points"},
                 {"baseline", "true", "also evaluate a uniform-noise Parzen model"},
             }})},
      {"interpolate", "closed-loop linear interpolation between prior anchors",
       join({common_keys(), model_keys(),
             {
                 {"anchors", "5", "number of prior anchors"},
                 {"steps_between", "7", "interpolated frames between consecutive anchors"},
             }})},
      {"nn-audit", "samples paired with their nearest training images",
       join({common_keys(), dataset_keys(), model_keys(),
             {
                 {"n", "10", "number of samples"},
                 {"grid_cols", "10", "samples per grid row pair"},
             }})},
  };
}

// --- config access -------------------------------------------------------------

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

class Settings {
public:
  explicit Settings(Config values) : values_(std::move(values)) {}

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::logic_error("unknown config key " + key);
    return it->second;
  }

  double num(const std::string& key) const {
    try {
      return parse_double(str(key));
    } catch (const ConfigError&) {
      throw ConfigError(key + ": expected a number, got '" + str(key) + "'");
    }
  }

  Index count(const std::string& key) const {
    const std::string& s = str(key);
    Index v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0) {
      throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& s = str(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError(key + ": expected an unsigned integer, got '" + s + "'");
    }
    return v;
  }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
  }

  std::vector<double> nums(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(parse_double(trim(item)));
      } catch (const ConfigError&) {
        throw ConfigError(key + ": expected a comma-separated list of numbers, got '" + str(key) + "'");
      }
    }
    return out;
  }

  std::vector<Index> counts(const std::string& key) const {
    std::vector<Index> out;
    for (double v : nums(key)) {
      if (!(v >= 1) || v != std::floor(v)) throw ConfigError(key + ": widths must be positive integers");
      out.push_back(static_cast<Index>(v));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
  }

private:
  Config values_;
};

// --- datasets --------------------------------------------------------------------

struct MnistFile {
  const char* name;
  const char* md5_gz;
};

constexpr MnistFile kMnistFiles[] = {
    {"train-images-idx3-ubyte", "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
    {"train-labels-idx1-ubyte", "d53e105ee54ea40749a09fcbcd1e9432"},
    {"t10k-images-idx3-ubyte", "9fb629c4189551a2d022fa330f9573f3"},
    {"t10k-labels-idx1-ubyte", "ec29112dd5afa0611ce80d1b7f02629c"},
};

fs::path find_mnist_file(const fs::path& dir, const std::string& name) {
  if (fs::exists(dir / name)) return dir / name;
  if (fs::exists(dir / (name + ".gz"))) return dir / (name + ".gz");
  std::ostringstream msg;
  msg << "MNIST file " << name << "[.gz] not found in " << dir.string()
      << "; download the standard files (gzip MD5s:";
  for (const auto& f : kMnistFiles) msg << " " << f.name << ".gz=" << f.md5_gz;
  msg << ") and pass --data-dir";
  throw DataError(DataErrorCode::io, msg.str());
}

MatrixXd head_rows(const MatrixXd& m, Index limit) {
  if (limit <= 0 || limit >= m.rows()) return m;
  return m.topRows(limit);
}

Dataset load_dataset(const Settings& s) {
  const std::string kind = s.str("dataset");
  const std::uint64_t seed = s.u64("seed");
  Dataset ds;
  if (kind == "mnist") {
    const fs::path dir = s.str("data_dir");
    const IdxImages train = load_idx_images(find_mnist_file(dir, "train-images-idx3-ubyte"));
    const IdxImages test = load_idx_images(find_mnist_file(dir, "t10k-images-idx3-ubyte"));
    ds = mnist_splits(train.pixels, seed);
    ds.test = test.pixels;
    ds.image_shape = train.shape;
  } else if (kind == "idx") {
    if (s.str("train_images").empty() || s.str("test_images").empty()) {
      throw ConfigError("dataset=idx needs --train-images and --test-images");
    }
    const IdxImages train = load_idx_images(s.str("train_images"));
    const IdxImages test = load_idx_images(s.str("test_images"));
    if (test.pixels.cols() != train.pixels.cols()) {
      throw DataError(DataErrorCode::row_count, "test images are " + shape_string(test.pixels) +
                                                    " but training images are " + shape_string(train.pixels));
    }
    ds = split_train_valid(train.pixels, s.count("valid_count"), seed);
    ds.test = test.pixels;
    ds.image_shape = train.shape;
  } else if (kind == "gmm2d") {
    MatrixXd means(4, 2);
    means << 2, 2, 2, -2, -2, 2, -2, -2;
    const std::vector<double> stds(4, s.num("gmm_std"));
    Rng rng = Rng(seed).substream("data");
    const Index n = s.count("gmm_n");
    ds.train = synth_gaussian_mixture(rng, n, means, stds);
    ds.valid = synth_gaussian_mixture(rng, n, means, stds);
    ds.test = synth_gaussian_mixture(rng, n, means, stds);
  } else {
    throw ConfigError("dataset must be mnist, idx or gmm2d, got '" + kind + "'");
  }
  ds.train = head_rows(ds.train, s.count("train_limit"));
  ds.test = head_rows(ds.test, s.count("test_limit"));
  return ds;
}

std::map<std::string, std::string> shape_metadata(const std::optional<ImageShape>& shape) {
  if (!shape) return {};
  return {{"image_height", std::to_string(shape->height)}, {"image_width", std::to_string(shape->width)}};
}

std::optional<ImageShape> shape_from_metadata(const std::map<std::string, std::string>& meta) {
  const auto h = meta.find("image_height");
  const auto w = meta.find("image_width");
  if (h == meta.end() || w == meta.end()) return std::nullopt;
  return ImageShape{std::stoll(h->second), std::stoll(w->second)};
}

// --- model loading ---------------------------------------------------------------

struct Model {
  Network net;
  std::optional<AutoEncoder> ae;
  std::optional<ImageShape> shape;

  const AutoEncoder* decoder() const { return ae ? &*ae : nullptr; }
  Index output_dim() const { return ae ? ae->input_dim() : net.output_dim(); }
};

Model load_model(const Settings& s) {
  const fs::path ckpt_path = s.str("gmmn").empty() ? fs::path(s.str("out_dir")) / "gmmn.ckpt" : fs::path(s.str("gmmn"));
  if (!fs::exists(ckpt_path)) {
    throw DataError(DataErrorCode::io, "GMMN checkpoint " + ckpt_path.string() +
                                           " not found; run train-gmmn first or pass --gmmn");
  }
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.component != Component::gmmn) {
    throw DataError(DataErrorCode::corrupt_length, ckpt_path.string() + " is an autoencoder checkpoint, not a GMMN");
  }
  Model m;
  m.net = std::move(ckpt.network);
  m.shape = shape_from_metadata(ckpt.metadata);
  std::string ae_dir = s.str("ae");
  const auto space = ckpt.metadata.find("space");
  const bool code_space = space != ckpt.metadata.end() && space->second == "code";
  if (ae_dir.empty() && code_space) {
    const auto rec = ckpt.metadata.find("ae_dir");
    if (rec == ckpt.metadata.end()) throw ConfigError("code-space GMMN needs --ae");
    ae_dir = rec->second;
  }
  if (!ae_dir.empty()) {
    if (!code_space) throw ConfigError("--ae given but " + ckpt_path.string() + " was trained in data space");
    m.ae = load_autoencoder(ae_dir);
    if (m.ae->code_dim() != m.net.output_dim()) {
      throw ShapeError("autoencoder code dim " + std::to_string(m.ae->code_dim()) + " does not match GMMN output " +
                       std::to_string(m.net.output_dim()));
    }
  }
  return m;
}

void write_text(const fs::path& path, const std::string& text) { write_file_bytes(path, text); }

void maybe_emit_grid(const MatrixXd& rows, const std::optional<ImageShape>& shape, Index grid_cols,
                     const fs::path& path, std::ostream& out) {
  if (!shape || shape->pixels() != rows.cols()) {
    out << "no image shape for " << rows.cols() << "-column samples; skipping " << path.filename().string() << '\n';
    return;
  }
  emit_grid(rows, *shape, grid_cols, path);
  out << "wrote " << path.string() << '\n';
}

TrainConfig base_train_config(const Settings& s) {
  TrainConfig cfg;
  cfg.lr = s.num("lr");
  cfg.momentum = s.num("momentum");
  cfg.minibatch = s.count("minibatch");
  cfg.dropout_rate = s.num("dropout");
  cfg.seed = s.u64("seed");
  return cfg;
}

// Sigmoid codes sit in (0, 1)^k, where the pixel-space bandwidths are almost flat.
const std::vector<double> kCodeSigmas = {0.25, 0.5, 1.0, 2.0, 4.0};

// --- commands ----------------------------------------------------------------------

int cmd_train_ae(const Settings& s, std::ostream& out) {
  const Dataset ds = load_dataset(s);
  if (s.str("dataset") == "gmm2d") throw ConfigError("train-ae needs image data in [0, 1]; use mnist or idx");
  const fs::path dir = s.str("out_dir");
  const auto arch = encoder_specs(ds.train.cols(), s.counts("widths"));

  TrainConfig pre = base_train_config(s);
  pre.lr = s.num("pretrain_lr");
  pre.steps = s.count("pretrain_steps");
  TrainConfig fine = base_train_config(s);
  const Index per_epoch = ds.train.rows() / std::max<Index>(fine.minibatch, 1);
  fine.steps = s.count("finetune_epochs") * per_epoch;

  Rng rng(s.u64("seed"));
  out << "pretraining " << arch.size() << " layers, " << pre.steps << " steps each, on " << ds.train.rows()
      << " rows\n";
  AutoEncoder ae = pretrain_layerwise(ds.train, arch, pre, rng);

  std::ostringstream log;
  const auto report_ce = [&](const char* tag, const AutoEncoder& a) {
    const double train_ce = cross_entropy(decode(a, encode(a, ds.train)), ds.train);
    const double valid_ce = cross_entropy(decode(a, encode(a, ds.valid)), ds.valid);
    log << tag << " train_ce " << format_double(train_ce) << " heldout_ce " << format_double(valid_ce) << '\n';
    out << tag << " train_ce " << train_ce << " heldout_ce " << valid_ce << '\n';
  };
  report_ce("pretrained", ae);
  ae = finetune(std::move(ae), ds.train, fine, rng, &ds.valid, [&](const EpochRecord& r) {
    log << "epoch " << r.epoch << " step " << r.step << " train_ce " << format_double(r.train_ce) << " heldout_ce "
        << format_double(r.heldout_ce) << '\n';
    out << "epoch " << r.epoch << " step " << r.step << " train_ce " << r.train_ce << " heldout_ce " << r.heldout_ce
        << '\n';
  });

  auto meta = shape_metadata(ds.image_shape);
  meta["command"] = "train-ae";
  meta["seed"] = s.str("seed");
  save_autoencoder(dir, ae, meta);
  write_text(dir / "ae_loss.log", log.str());
  out << "wrote " << (dir / "encoder.ckpt").string() << ", " << (dir / "decoder.ckpt").string() << '\n';
  return kOk;
}

int cmd_train_gmmn(const Settings& s, std::ostream& out) {
  const Dataset ds = load_dataset(s);
  const fs::path dir = s.str("out_dir");
  const bool synthetic = s.str("dataset") == "gmm2d";

  std::optional<AutoEncoder> ae;
  if (!s.str("ae").empty()) {
    ae = load_autoencoder(s.str("ae"));
    if (ae->input_dim() != ds.train.cols()) {
      throw ShapeError("autoencoder expects " + std::to_string(ae->input_dim()) + " columns but the data has " +
                       std::to_string(ds.train.cols()));
    }
  }
  const Index out_dim = ae ? ae->code_dim() : ds.train.cols();

  std::string out_act = s.str("output_activation");
  if (out_act.empty()) out_act = synthetic ? "linear" : "sigmoid";
  auto specs = mlp_specs(s.count("prior_dim"), s.counts("hidden"), out_dim, parse_activation(s.str("hidden_activation")),
                         parse_activation(out_act));
  const double dropout = s.num("dropout");
  for (std::size_t l = 0; l + 1 < specs.size(); ++l) specs[l].dropout_rate = dropout;

  TrainConfig cfg = base_train_config(s);
  cfg.dropout_rate = 0.0;
  cfg.steps = s.count("steps");
  cfg.loss = parse_loss(s.str("loss"));
  cfg.log_every = s.count("log_every");
  cfg.heldout_samples = s.count("heldout_samples");
  cfg.patience = s.count("patience");
  std::vector<double> sigmas = s.nums("sigmas");
  if (sigmas.empty()) {
    if (synthetic) sigmas = KernelSpec::synthetic_defaults().bandwidths;
    else if (ae) sigmas = kCodeSigmas;
    else sigmas = KernelSpec::pixel_defaults().bandwidths;
  }
  std::vector<double> weights = s.nums("kernel_weights");
  if (weights.empty()) weights.assign(sigmas.size(), 1.0);
  cfg.kernel = KernelSpec(sigmas, weights);

  Rng rng(s.u64("seed"));
  Rng init = rng.substream("init");
  Network net = init_network(specs, init);
  out << "training " << (ae ? "code-space" : "data-space") << " GMMN, " << net.parameter_count() << " parameters, "
      << cfg.steps << " steps\n";

  TrainReport report = ae ? train_gmmn_ae(ds.train, *ae, net, cfg, rng, &ds.valid)
                          : train_gmmn(ds.train, net, cfg, rng, &ds.valid);
  for (const auto& e : report.log) out << "step " << e.step << " loss " << e.loss << '\n';
  if (report.heldout_mmd) {
    out << "heldout sqrt MMD " << *report.initial_heldout_mmd << " -> " << *report.heldout_mmd << '\n';
  }

  Checkpoint ckpt;
  ckpt.component = Component::gmmn;
  ckpt.metadata = shape_metadata(ds.image_shape);
  ckpt.metadata["command"] = "train-gmmn";
  ckpt.metadata["seed"] = s.str("seed");
  ckpt.metadata["space"] = ae ? "code" : "data";
  if (ae) ckpt.metadata["ae_dir"] = s.str("ae");
  ckpt.network = std::move(net);
  save_checkpoint(dir / "gmmn.ckpt", ckpt);
  std::ostringstream text;
  write_report(text, report);
  write_text(dir / "train_report.txt", text.str());
  out << "wrote " << (dir / "gmmn.ckpt").string() << '\n';
  return kOk;
}

int cmd_sample(const Settings& s, std::ostream& out) {
  const Model m = load_model(s);
  const fs::path dir = s.str("out_dir");
  const Index n = s.count("n");
  Rng rng = Rng(s.u64("seed")).substream("sample");
  const MatrixXd samples = generate(m.net, m.decoder(), n, rng);
  save_matrix(dir / "samples.bin", samples);
  out << "wrote " << (dir / "samples.bin").string() << " (" << samples.rows() << "x" << samples.cols() << ")\n";
  maybe_emit_grid(samples, m.shape, s.count("grid_cols"), dir / "samples.pgm", out);
  return kOk;
}

void write_ll_report(const fs::path& path, double sigma, const LogLikelihood& ll, Index n) {
  std::ostringstream text;
  text << "parzen_sigma " << format_double(sigma) << '\n';
  text << "test_ll " << format_double(ll.mean) << " +/- " << format_double(ll.standard_error) << '\n';
  text << "n_samples " << n << '\n';
  write_text(path, text.str());
}

int cmd_eval(const Settings& s, std::ostream& out) {
  const Dataset ds = load_dataset(s);
  const Model m = load_model(s);
  if (m.output_dim() != ds.test.cols()) {
    throw ShapeError("model produces " + std::to_string(m.output_dim()) + " columns but the data has " +
                     std::to_string(ds.test.cols()));
  }
  const fs::path dir = s.str("out_dir");
  const Index n = s.count("n_samples");
  const int grid_n = static_cast<int>(s.count("grid_n"));
  const auto grid = log_spaced_grid(s.num("grid_lo"), s.num("grid_hi"), grid_n);

  Rng rng(s.u64("seed"));
  Rng eval_rng = rng.substream("eval");
  const MatrixXd samples = generate(m.net, m.decoder(), n, eval_rng);
  const ParzenSearch search = parzen_grid_search(samples, ds.valid, grid);
  const LogLikelihood ll = parzen_loglik(search.model, ds.test);
  write_ll_report(dir / "eval_report.txt", search.model.sigma, ll, n);
  out << "parzen_sigma " << search.model.sigma << "\ntest_ll " << ll.mean << " +/- " << ll.standard_error
      << "\nn_samples " << n << '\n';

  if (s.flag("baseline")) {
    Rng noise_rng = rng.substream("baseline");
    const MatrixXd noise = rng_uniform(noise_rng, n, ds.test.cols(), 0.0, 1.0);
    const ParzenSearch base = parzen_grid_search(noise, ds.valid, grid);
    const LogLikelihood bll = parzen_loglik(base.model, ds.test);
    write_ll_report(dir / "baseline_report.txt", base.model.sigma, bll, n);
    out << "uniform-noise baseline test_ll " << bll.mean << " +/- " << bll.standard_error << '\n';
  }
  return kOk;
}

int cmd_interpolate(const Settings& s, std::ostream& out) {
  const Model m = load_model(s);
  const fs::path dir = s.str("out_dir");
  const Index n_anchors = s.count("anchors");
  const Index between = s.count("steps_between");
  if (n_anchors < 1) throw ConfigError("anchors must be at least 1");
  Rng rng = Rng(s.u64("seed")).substream("anchors");
  const MatrixXd anchors = sample_prior(rng, n_anchors, m.net.input_dim());
  const MatrixXd frames = interpolate_prior(m.net, m.decoder(), anchors, between);
  save_matrix(dir / "anchors.bin", anchors);
  save_matrix(dir / "interpolation.bin", frames);
  out << "wrote " << (dir / "interpolation.bin").string() << " (" << frames.rows() << " frames)\n";
  maybe_emit_grid(frames, m.shape, between + 1, dir / "interpolation.pgm", out);
  return kOk;
}

int cmd_nn_audit(const Settings& s, std::ostream& out) {
  const Dataset ds = load_dataset(s);
  const Model m = load_model(s);
  if (m.output_dim() != ds.train.cols()) {
    throw ShapeError("model produces " + std::to_string(m.output_dim()) + " columns but the data has " +
                     std::to_string(ds.train.cols()));
  }
  const fs::path dir = s.str("out_dir");
  const Index n = s.count("n");
  const Index cols = s.count("grid_cols");
  if (cols < 1 || n % cols != 0) throw ConfigError("n must be a positive multiple of grid_cols");

  Rng rng = Rng(s.u64("seed")).substream("nn-audit");
  const MatrixXd samples = generate(m.net, m.decoder(), n, rng);
  const Neighbors nn = nearest_neighbors(samples, ds.train, 1);

  // Each band of grid_cols samples is followed by a band of their neighbours.
  MatrixXd tiles(2 * n, samples.cols());
  std::ostringstream text;
  for (Index i = 0; i < n; ++i) {
    const Index band = i / cols;
    const Index col = i % cols;
    tiles.row(2 * band * cols + col) = samples.row(i);
    tiles.row((2 * band + 1) * cols + col) = ds.train.row(nn.indices(i, 0));
    text << "sample " << i << " neighbor " << nn.indices(i, 0) << " distance " << format_double(nn.distances(i, 0))
         << '\n';
  }
  save_matrix(dir / "nn_samples.bin", samples);
  write_text(dir / "nn_audit.txt", text.str());
  out << "wrote " << (dir / "nn_audit.txt").string() << '\n';
  maybe_emit_grid(tiles, ds.image_shape, cols, dir / "nn_audit.pgm", out);
  return kOk;
}

using Handler = std::function<int(const Settings&, std::ostream&)>;

Handler handler_for(const std::string& name) {
  if (name == "train-ae") return cmd_train_ae;
  if (name == "train-gmmn") return cmd_train_gmmn;
  if (name == "sample") return cmd_sample;
  if (name == "eval") return cmd_eval;
  if (name == "interpolate") return cmd_interpolate;
  return cmd_nn_audit;
}

std::string echo_config(const Command& cmd, const Config& resolved) {
  std::ostringstream os;
  os << "# resolved configuration for " << cmd.name << "; replay with --config\n";
  for (const auto& k : cmd.keys) os << k.name << " = " << resolved.at(k.name) << '\n';
  return os.str();
}

} // namespace

Config parse_config_text(const std::string& text) {
  Config out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto cmds = commands();
  CLI::App app{"Generative moment matching networks: training, sampling and evaluation", "gmmn"};
  app.require_subcommand(1);

  std::map<std::string, std::map<std::string, std::string>> flag_values;
  std::map<std::string, std::map<std::string, CLI::Option*>> flag_opts;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    subs[c.name] = sub;
    sub->add_option("--config", config_paths[c.name], "flat key = value config file");
    for (const auto& k : c.keys) {
      flag_opts[c.name][k.name] =
          sub->add_option("--" + flag_name(k.name), flag_values[c.name][k.name], k.help + " [" + k.value + "]");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  const Command* cmd = nullptr;
  for (const auto& c : cmds) {
    if (subs[c.name]->parsed()) cmd = &c;
  }
  if (cmd == nullptr) {
    err << "error: no command given\n";
    return kUsage;
  }

  try {
    Config resolved;
    for (const auto& k : cmd->keys) resolved[k.name] = k.value;
    const std::string& config_path = config_paths[cmd->name];
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw ConfigError("config file " + config_path + " not found");
      std::ifstream in(config_path, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      for (const auto& [k, v] : parse_config_text(ss.str())) {
        if (!resolved.contains(k)) throw ConfigError("config file " + config_path + ": unknown key '" + k + "'");
        resolved[k] = v;
      }
    }
    for (const auto& k : cmd->keys) {
      if (flag_opts[cmd->name][k.name]->count() > 0) resolved[k.name] = flag_values[cmd->name][k.name];
    }

    const fs::path dir = resolved.at("out_dir");
    fs::create_directories(dir);
    write_text(dir / (cmd->name + ".cfg"), echo_config(*cmd, resolved));
    return handler_for(cmd->name)(Settings(resolved), out);
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kNumericalAbort;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

} // namespace gmmn::cli
