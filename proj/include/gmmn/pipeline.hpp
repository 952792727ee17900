#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "gmmn/autoencoder.hpp"
#include "gmmn/network.hpp"
#include "gmmn/training.hpp"

namespace gmmn {

struct LogEntry {
  Index step = 0;
  double loss = 0.0;
  double seconds = 0.0; ///< wall clock since training started; not part of the text report
};

struct TrainReport {
  std::vector<LogEntry> log;
  Index steps_run = 0;
  /// Held-out sqrt(MMD^2) before the first and after the last step; empty
  /// when no held-out set was given.
  std::optional<double> initial_heldout_mmd;
  std::optional<double> heldout_mmd;
  bool stopped_early = false;
};

/// Line-oriented report: `step <i> loss <v>` per logged step, then
/// `heldout_mmd <v>` when available. Values use shortest round-trip formatting.
void write_report(std::ostream& out, const TrainReport& report);

/// Observer hook for instrumented runs: receives the data row indices of
/// every minibatch, in order.
using BatchObserver = std::function<void(Index step, std::span<const Index> rows)>;

/// Minibatch MMD training of a generator network (prior -> data space).
///
/// Each step draws a data minibatch (epoch shuffling without replacement,
/// ragged tail dropped), draws an equally sized fresh prior batch, runs the
/// generator, takes the loss gradient with respect to the generated samples,
/// backpropagates it and applies a momentum step. The network is updated in
/// place. Randomness is split into the named sub-streams "data-shuffle",
/// "prior", "dropout" and "heldout" of rng.
TrainReport train_gmmn(const MatrixXd& data, Network& net, const TrainConfig& cfg, Rng& rng,
                       const MatrixXd* heldout = nullptr, const BatchObserver& observer = {});

/// GMMN in the code space of a frozen autoencoder: encodes data (and the
/// held-out set) once and delegates to train_gmmn.
TrainReport train_gmmn_ae(const MatrixXd& data, const AutoEncoder& ae, Network& net, const TrainConfig& cfg,
                          Rng& rng, const MatrixXd* heldout = nullptr, const BatchObserver& observer = {});

/// n eval-mode samples; decoded through the autoencoder when one is given.
MatrixXd generate(const Network& net, const AutoEncoder* decoder, Index n, Rng& rng);

/// sqrt(max(MMD^2, 0)) between a fixed prior draw pushed through net and target.
double heldout_sqrt_mmd(const Network& net, const MatrixXd& target, const MatrixXd& prior, const KernelSpec& k);

} // namespace gmmn
