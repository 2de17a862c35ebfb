#pragma once

#include <cstdint>
#include <vector>

#include "gyrocal/nn/model.hpp"

namespace gyrocal::nn {

/// Contiguous training data: x is [N, 3, W], y is [N, 2].
struct Dataset {
  Tensor x;
  Tensor y;

  std::size_t size() const { return x.shape.empty() ? 0 : x.dim(0); }
  /// Copies the rows at `indices` into batch tensors.
  std::pair<Tensor, Tensor> gather(const std::vector<std::size_t>& indices) const;
};

struct TrainHyper {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 150;
  std::size_t patience = 20;
  std::uint64_t seed = 3;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Adam with bias correction; state per parameter tensor.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor*>> params, double lr,
       double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step();

 private:
  std::vector<std::pair<std::string, Tensor*>> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, epsilon_;
  std::uint64_t t_ = 0;
};

/// Mini-batch training of the joint (scale, bias) loss. Re-initializes the
/// model from hyper.seed, shuffles per epoch, tracks the best-validation
/// parameters and restores them on exit, stops early after `patience` epochs
/// without validation improvement. Fully deterministic per seed. Throws
/// NumericError when the loss turns non-finite.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainHyper& hyper);

/// Loss of the model over a dataset in Eval mode (exact full-set RMSE,
/// computed batch-wise).
double evaluate_loss(Model& model, const Dataset& set, std::size_t batch_size = 256);

}  // namespace gyrocal::nn
