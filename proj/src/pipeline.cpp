#include "gmmn/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "gmmn/format.hpp"
#include "gmmn/mmd.hpp"

namespace gmmn {

void write_report(std::ostream& out, const TrainReport& report) {
  for (const auto& e : report.log) out << "step " << e.step << " loss " << format_double(e.loss) << '\n';
  if (report.heldout_mmd) out << "heldout_mmd " << format_double(*report.heldout_mmd) << '\n';
}

double heldout_sqrt_mmd(const Network& net, const MatrixXd& target, const MatrixXd& prior, const KernelSpec& k) {
  const MatrixXd samples = predict(net, prior);
  return std::sqrt(std::max(mmd2_biased(samples, target, k).mmd2, 0.0));
}

TrainReport train_gmmn(const MatrixXd& data, Network& net, const TrainConfig& cfg, Rng& rng,
                       const MatrixXd* heldout, const BatchObserver& observer) {
  cfg.validate();
  if (net.layers.empty()) throw ConfigError("train_gmmn: empty network");
  if (net.output_dim() != data.cols()) {
    throw ShapeError("train_gmmn: network outputs " + std::to_string(net.output_dim()) + " columns but data is " +
                     shape_string(data));
  }
  if (data.rows() < cfg.minibatch) {
    throw ConfigError("train_gmmn: " + std::to_string(data.rows()) + " data rows is fewer than minibatch " +
                      std::to_string(cfg.minibatch));
  }
  if (heldout != nullptr && heldout->cols() != data.cols()) {
    throw ShapeError("train_gmmn: held-out set " + shape_string(*heldout) + " does not match data " +
                     shape_string(data));
  }

  const Index prior_dim = net.input_dim();
  MinibatchSampler sampler(data.rows(), cfg.minibatch, rng.substream("data-shuffle"));
  Rng prior_rng = rng.substream("prior");
  Rng dropout_rng = rng.substream("dropout");

  // A fixed prior draw makes held-out measurements comparable across steps.
  MatrixXd heldout_target;
  MatrixXd heldout_prior;
  if (heldout != nullptr && heldout->rows() > 0) {
    const Index n = std::min(heldout->rows(), cfg.heldout_samples);
    heldout_target = heldout->topRows(n);
    Rng heldout_rng = rng.substream("heldout");
    heldout_prior = sample_prior(heldout_rng, n, prior_dim);
  }
  const bool has_heldout = heldout_target.rows() > 0;

  TrainReport report;
  if (has_heldout) report.initial_heldout_mmd = heldout_sqrt_mmd(net, heldout_target, heldout_prior, cfg.kernel);

  double best = report.initial_heldout_mmd.value_or(0.0);
  Index evals_without_improvement = 0;
  const auto start = std::chrono::steady_clock::now();

  for (Index step = 0; step < cfg.steps; ++step) {
    const auto rows = sampler.next();
    if (observer) observer(step, rows);
    const MatrixXd x_data = gather_rows(data, rows);
    const MatrixXd h = sample_prior(prior_rng, cfg.minibatch, prior_dim);
    const ForwardTrace trace = forward(net, h, Mode::train, dropout_rng);

    double loss = 0.0;
    MatrixXd grad;
    if (cfg.loss == LossKind::sqrt_mmd) {
      auto l = mmd_sqrt_loss(trace.output(), x_data, cfg.kernel);
      loss = l.loss;
      grad = std::move(l.grad);
    } else {
      auto vg = mmd2_value_and_grad(trace.output(), x_data, cfg.kernel);
      loss = vg.value.mmd2;
      grad = std::move(vg.grad);
    }
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw NumericalError("train_gmmn: non-finite loss at step " + std::to_string(step), step);
    }

    const Gradients grads = backward(net, trace, grad);
    try {
      sgd_momentum_step(net, grads, cfg.lr, cfg.momentum);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (step " + std::to_string(step) + ")", step);
    }
    report.steps_run = step + 1;

    const bool last = step + 1 == cfg.steps;
    const bool log_point = last || (cfg.log_every > 0 && step % cfg.log_every == 0);
    if (log_point) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      report.log.push_back({step, loss, elapsed.count()});
    }
    if (cfg.patience > 0 && has_heldout && log_point && !last) {
      const double current = heldout_sqrt_mmd(net, heldout_target, heldout_prior, cfg.kernel);
      if (current < best) {
        best = current;
        evals_without_improvement = 0;
      } else if (++evals_without_improvement >= cfg.patience) {
        report.stopped_early = true;
        break;
      }
    }
  }

  if (has_heldout) report.heldout_mmd = heldout_sqrt_mmd(net, heldout_target, heldout_prior, cfg.kernel);
  return report;
}

TrainReport train_gmmn_ae(const MatrixXd& data, const AutoEncoder& ae, Network& net, const TrainConfig& cfg,
                          Rng& rng, const MatrixXd* heldout, const BatchObserver& observer) {
  ae.validate();
  if (net.output_dim() != ae.code_dim()) {
    throw ShapeError("train_gmmn_ae: network outputs " + std::to_string(net.output_dim()) +
                     " columns but the autoencoder code dim is " + std::to_string(ae.code_dim()));
  }
  const MatrixXd codes = encode(ae, data);
  if (heldout != nullptr) {
    const MatrixXd heldout_codes = encode(ae, *heldout);
    return train_gmmn(codes, net, cfg, rng, &heldout_codes, observer);
  }
  return train_gmmn(codes, net, cfg, rng, nullptr, observer);
}

MatrixXd generate(const Network& net, const AutoEncoder* decoder, Index n, Rng& rng) {
  if (n < 1) throw ConfigError("generate: n must be positive");
  if (decoder != nullptr && decoder->decoder.input_dim() != net.output_dim()) {
    throw ShapeError("generate: network outputs " + std::to_string(net.output_dim()) +
                     " columns but the decoder expects " + std::to_string(decoder->decoder.input_dim()));
  }
  const MatrixXd prior = sample_prior(rng, n, net.input_dim());
  MatrixXd out = predict(net, prior);
  if (decoder != nullptr) out = predict(decoder->decoder, out);
  return out;
}

} // namespace gmmn
