#include "gmmn/training.hpp"

#include <cmath>

namespace gmmn {

std::string_view to_string(LossKind k) {
  return k == LossKind::mmd2 ? "mmd2" : "sqrt_mmd";
}

LossKind parse_loss(std::string_view name) {
  if (name == "mmd2") return LossKind::mmd2;
  if (name == "sqrt_mmd") return LossKind::sqrt_mmd;
  throw ConfigError("unknown loss '" + std::string(name) + "' (expected mmd2 or sqrt_mmd)");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a non-negative finite number");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (minibatch < 1) throw ConfigError("minibatch must be positive");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (log_every < 0) throw ConfigError("log_every must be non-negative");
  if (heldout_samples < 1) throw ConfigError("heldout_samples must be positive");
  if (patience < 0) throw ConfigError("patience must be non-negative");
  kernel.validate();
}

MinibatchSampler::MinibatchSampler(Index rows, Index batch, Rng rng)
    : rows_(rows), batch_(batch), rng_(std::move(rng)) {
  if (batch_ < 1) throw ConfigError("minibatch must be positive");
  if (rows_ < batch_) {
    throw ConfigError("dataset has " + std::to_string(rows_) + " rows, fewer than the minibatch size " +
                      std::to_string(batch_));
  }
}

void MinibatchSampler::reshuffle() {
  order_ = rng_.permutation(rows_);
  cursor_ = 0;
  ++epoch_;
}

std::span<const Index> MinibatchSampler::next() {
  if (epoch_ == 0 || cursor_ + batch_ > rows_) reshuffle();
  std::span<const Index> out(order_.data() + cursor_, static_cast<std::size_t>(batch_));
  cursor_ += batch_;
  return out;
}

MatrixXd gather_rows(const MatrixXd& m, std::span<const Index> idx) {
  MatrixXd out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
  return out;
}

} // namespace gmmn
