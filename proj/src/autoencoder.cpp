#include "gmmn/autoencoder.hpp"

#include <cmath>
#include <limits>

namespace gmmn {

namespace {

Network slice(const Network& net, std::size_t begin, std::size_t end) {
  Network out;
  out.layers.assign(net.layers.begin() + static_cast<std::ptrdiff_t>(begin),
                    net.layers.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

void check_training_inputs(const MatrixXd& data, Index input_dim, const TrainConfig& cfg) {
  cfg.validate();
  if (data.cols() != input_dim) {
    throw ShapeError("autoencoder: data " + shape_string(data) + " but input dim is " + std::to_string(input_dim));
  }
  if (cfg.steps > 0 && data.rows() < cfg.minibatch) {
    throw ConfigError("autoencoder: " + std::to_string(data.rows()) + " rows is fewer than minibatch " +
                      std::to_string(cfg.minibatch));
  }
}

// One CE step on a reconstruction network; returns the minibatch loss.
double reconstruction_step(Network& net, const MatrixXd& input, const TrainConfig& cfg, Rng& dropout_rng,
                           Index step) {
  const ForwardTrace trace = forward(net, input, Mode::train, dropout_rng);
  const double loss = cross_entropy(trace.output(), input);
  if (!std::isfinite(loss)) throw NumericalError("autoencoder: non-finite loss", step);
  const Gradients grads = backward(net, trace, cross_entropy_grad(trace.output(), input));
  try {
    sgd_momentum_step(net, grads, cfg.lr, cfg.momentum);
  } catch (const NumericalError& e) {
    throw NumericalError(e.what(), step);
  }
  return loss;
}

void reset_velocity(Network& net) {
  for (auto& layer : net.layers) {
    layer.weight_velocity.setZero();
    layer.bias_velocity.setZero();
  }
}

} // namespace

void AutoEncoder::validate() const {
  if (encoder.layers.empty() || decoder.layers.empty()) throw ShapeError("autoencoder: empty encoder or decoder");
  if (decoder.input_dim() != encoder.output_dim()) {
    throw ShapeError("autoencoder: decoder input " + std::to_string(decoder.input_dim()) + " != code dim " +
                     std::to_string(encoder.output_dim()));
  }
  if (decoder.output_dim() != encoder.input_dim()) {
    throw ShapeError("autoencoder: decoder output " + std::to_string(decoder.output_dim()) + " != input dim " +
                     std::to_string(encoder.input_dim()));
  }
}

std::vector<LayerSpec> encoder_specs(Index input_dim, const std::vector<Index>& widths) {
  if (widths.empty()) throw ConfigError("autoencoder: need at least one encoder layer");
  std::vector<LayerSpec> specs;
  Index prev = input_dim;
  for (Index w : widths) {
    specs.push_back({prev, w, Activation::sigmoid, 0.0});
    prev = w;
  }
  validate_specs(specs);
  return specs;
}

std::vector<LayerSpec> mirror_specs(const std::vector<LayerSpec>& encoder) {
  std::vector<LayerSpec> out;
  for (auto it = encoder.rbegin(); it != encoder.rend(); ++it) {
    out.push_back({it->out_dim, it->in_dim, Activation::sigmoid, 0.0});
  }
  return out;
}

AutoEncoder init_autoencoder(const std::vector<LayerSpec>& encoder_arch, Rng& rng) {
  validate_specs(encoder_arch);
  for (const auto& s : encoder_arch) {
    if (s.activation != Activation::sigmoid) throw ConfigError("autoencoder: encoder layers must be sigmoid");
  }
  AutoEncoder ae;
  ae.encoder = init_network(encoder_arch, rng);
  ae.decoder = init_network(mirror_specs(encoder_arch), rng);
  return ae;
}

MatrixXd encode(const AutoEncoder& ae, const MatrixXd& x) {
  return predict(ae.encoder, x);
}

MatrixXd decode(const AutoEncoder& ae, const MatrixXd& codes) {
  return predict(ae.decoder, codes);
}

double cross_entropy(const MatrixXd& recon, const MatrixXd& target) {
  if (recon.rows() != target.rows() || recon.cols() != target.cols()) {
    throw ShapeError("cross_entropy: recon " + shape_string(recon) + " vs target " + shape_string(target));
  }
  if (recon.rows() == 0) throw ShapeError("cross_entropy: empty batch");
  const auto r = recon.array().cwiseMax(kCrossEntropyClamp).cwiseMin(1.0 - kCrossEntropyClamp);
  const auto& t = target.array();
  const double total = -(t * r.log() + (1.0 - t) * (1.0 - r).log()).sum();
  return total / static_cast<double>(recon.rows());
}

MatrixXd cross_entropy_grad(const MatrixXd& recon, const MatrixXd& target) {
  if (recon.rows() != target.rows() || recon.cols() != target.cols()) {
    throw ShapeError("cross_entropy_grad: recon " + shape_string(recon) + " vs target " + shape_string(target));
  }
  const double inv_rows = 1.0 / static_cast<double>(recon.rows());
  return recon.binaryExpr(target, [inv_rows](double r, double t) {
    if (r < kCrossEntropyClamp || r > 1.0 - kCrossEntropyClamp) return 0.0;
    return inv_rows * (r - t) / (r * (1.0 - r));
  });
}

AutoEncoder pretrain_layerwise(const MatrixXd& data, const std::vector<LayerSpec>& arch, const TrainConfig& cfg,
                               Rng& rng) {
  Rng init_rng = rng.substream("init");
  AutoEncoder ae = init_autoencoder(arch, init_rng);
  check_training_inputs(data, ae.input_dim(), cfg);
  if (cfg.steps > 0 && !(cfg.lr > 0.0)) throw ConfigError("pretrain_layerwise: lr must be positive");

  const std::size_t depth = ae.encoder.layers.size();
  for (std::size_t l = 0; l < depth; ++l) {
    const Network below = slice(ae.encoder, 0, l);
    Network stage;
    stage.layers.push_back(ae.encoder.layers[l]);
    stage.layers.back().spec.dropout_rate = cfg.dropout_rate;
    stage.layers.push_back(ae.decoder.layers[depth - 1 - l]);

    const std::string tag = "pretrain-" + std::to_string(l);
    MinibatchSampler sampler(data.rows(), cfg.minibatch, rng.substream(tag + "-shuffle"));
    Rng dropout_rng = rng.substream(tag + "-dropout");
    for (Index step = 0; step < cfg.steps; ++step) {
      MatrixXd input = gather_rows(data, sampler.next());
      if (!below.layers.empty()) input = predict(below, input);
      reconstruction_step(stage, input, cfg, dropout_rng, step);
    }

    stage.layers.front().spec.dropout_rate = ae.encoder.layers[l].spec.dropout_rate;
    ae.encoder.layers[l] = std::move(stage.layers[0]);
    ae.decoder.layers[depth - 1 - l] = std::move(stage.layers[1]);
  }
  return ae;
}

AutoEncoder finetune(AutoEncoder ae, const MatrixXd& data, const TrainConfig& cfg, Rng& rng,
                     const MatrixXd* heldout, const EpochCallback& on_epoch) {
  ae.validate();
  check_training_inputs(data, ae.input_dim(), cfg);
  if (heldout != nullptr && heldout->cols() != ae.input_dim()) {
    throw ShapeError("finetune: held-out set " + shape_string(*heldout) + " does not match input dim");
  }

  const std::size_t enc_depth = ae.encoder.layers.size();
  std::vector<double> original_dropout;
  Network joint;
  for (const auto& layer : ae.encoder.layers) {
    original_dropout.push_back(layer.spec.dropout_rate);
    joint.layers.push_back(layer);
    joint.layers.back().spec.dropout_rate = cfg.dropout_rate;
  }
  for (const auto& layer : ae.decoder.layers) joint.layers.push_back(layer);
  reset_velocity(joint);

  auto split = [&](const Network& net) {
    AutoEncoder out;
    out.encoder = slice(net, 0, enc_depth);
    out.decoder = slice(net, enc_depth, net.layers.size());
    for (std::size_t l = 0; l < enc_depth; ++l) out.encoder.layers[l].spec.dropout_rate = original_dropout[l];
    out.encoder.update_count = net.update_count;
    out.decoder.update_count = net.update_count;
    return out;
  };

  if (cfg.steps == 0) return split(joint);

  MinibatchSampler sampler(data.rows(), cfg.minibatch, rng.substream("finetune-shuffle"));
  Rng dropout_rng = rng.substream("finetune-dropout");
  const Index per_epoch = sampler.batches_per_epoch();

  double epoch_loss = 0.0;
  Index epoch_steps = 0;
  for (Index step = 0; step < cfg.steps; ++step) {
    const MatrixXd batch = gather_rows(data, sampler.next());
    epoch_loss += reconstruction_step(joint, batch, cfg, dropout_rng, step);
    ++epoch_steps;

    const bool epoch_done = (step + 1) % per_epoch == 0;
    const bool last = step + 1 == cfg.steps;
    if ((epoch_done || last) && on_epoch) {
      EpochRecord rec;
      rec.epoch = (step + 1 + per_epoch - 1) / per_epoch;
      rec.step = step + 1;
      rec.train_ce = epoch_loss / static_cast<double>(epoch_steps);
      rec.heldout_ce = std::numeric_limits<double>::quiet_NaN();
      if (heldout != nullptr && heldout->rows() > 0) {
        rec.heldout_ce = cross_entropy(predict(joint, *heldout), *heldout);
        if (!std::isfinite(rec.heldout_ce)) throw NumericalError("finetune: non-finite held-out loss", step);
      }
      on_epoch(rec);
    }
    if (epoch_done) {
      epoch_loss = 0.0;
      epoch_steps = 0;
    }
  }
  return split(joint);
}

} // namespace gmmn
