#include "gyrocal/nn/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gyrocal/errors.hpp"
#include "gyrocal/rng.hpp"

namespace gyrocal::nn {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5481;
constexpr std::uint64_t kDropoutStream = 0xD409;

struct Snapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> buffers;

  static Snapshot take(Model& model) {
    Snapshot s;
    for (auto& [name, t] : model.parameters()) s.params.push_back(t->values);
    for (auto& [name, t] : model.buffers()) s.buffers.push_back(t->values);
    return s;
  }

  void restore(Model& model) const {
    std::size_t i = 0;
    for (auto& [name, t] : model.parameters()) t->values = params[i++];
    i = 0;
    for (auto& [name, t] : model.buffers()) t->values = buffers[i++];
  }
};

/// Sum of squared residuals of the model over a dataset, accumulated
/// batch-wise so the aggregate RMSE is exact.
double accumulate_sse(Model& model, const Dataset& set, std::size_t batch_size) {
  double sse = 0.0;
  const std::size_t n = set.size();
  std::vector<std::size_t> idx(batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    auto [bx, by] = set.gather(idx);
    Tensor pred = model_forward(model, bx);
    for (std::size_t i = 0; i < pred.numel(); ++i) {
      double d = pred.values[i] - by.values[i];
      sse += d * d;
    }
  }
  return sse;
}

}  // namespace

std::pair<Tensor, Tensor> Dataset::gather(const std::vector<std::size_t>& indices) const {
  const std::size_t row = x.dim(1) * x.dim(2);
  Tensor bx = Tensor::zeros({indices.size(), x.dim(1), x.dim(2)});
  Tensor by = Tensor::zeros({indices.size(), 2});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    std::copy_n(&x.values[i * row], row, &bx.values[k * row]);
    std::copy_n(&y.values[i * 2], 2, &by.values[k * 2]);
  }
  return {std::move(bx), std::move(by)};
}

Adam::Adam(std::vector<std::pair<std::string, Tensor*>> params, double lr,
           double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon) {
  for (auto& [name, t] : params_) {
    m_.emplace_back(t->numel(), 0.0);
    v_.emplace_back(t->numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = *params_[p].second;
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double g = t.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      t.values[i] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
    }
  }
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainHyper& hyper) {
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw std::invalid_argument("train: empty train or validation set");
  }
  if (hyper.batch_size == 0) throw std::invalid_argument("train: batch_size must be > 0");

  init_params(model, hyper.seed);
  model.train();
  Adam optimizer(model.parameters(), hyper.lr);
  Rng shuffle_rng(derive_seed(hyper.seed, kShuffleStream));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  Snapshot best_snapshot = Snapshot::take(model);
  std::size_t epochs_since_best = 0;
  std::uint64_t step_counter = 0;

  for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double train_sse = 0.0;
    std::size_t train_elems = 0;
    model.train();
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t count = std::min(hyper.batch_size, order.size() - start);
      std::vector<std::size_t> batch_idx(order.begin() + start,
                                         order.begin() + start + count);
      auto [bx, by] = train_set.gather(batch_idx);

      ModelCache cache;
      const std::uint64_t drop_seed =
          derive_seed(hyper.seed, kDropoutStream + step_counter);
      double loss = model_loss_forward(model, bx, by, cache, drop_seed);
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", step " +
                           std::to_string(step_counter));
      }
      const std::size_t elems = cache.pred.numel();
      train_sse += (loss / 100.0) * (loss / 100.0) * static_cast<double>(elems);
      train_elems += elems;

      model.zero_grad();
      model_backward(model, cache);
      optimizer.step();
      ++step_counter;
    }

    const double train_loss =
        100.0 * std::sqrt(train_sse / static_cast<double>(train_elems));

    model.eval();
    const double val_sse = accumulate_sse(model, val_set, 256);
    const double val_loss =
        100.0 * std::sqrt(val_sse / static_cast<double>(2 * val_set.size()));
    if (!std::isfinite(val_loss)) {
      throw NumericError("training diverged: non-finite validation loss at epoch " +
                         std::to_string(epoch));
    }

    result.history.push_back({epoch, train_loss, val_loss});

    if (val_loss < best_val) {
      best_val = val_loss;
      best_snapshot = Snapshot::take(model);
      result.best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= hyper.patience) break;
    }
  }

  best_snapshot.restore(model);
  model.eval();
  result.best_val_loss = best_val;
  return result;
}

double evaluate_loss(Model& model, const Dataset& set, std::size_t batch_size) {
  if (set.size() == 0) throw std::invalid_argument("evaluate_loss: empty dataset");
  Mode saved = model.mode;
  model.eval();
  double sse = accumulate_sse(model, set, batch_size);
  model.mode = saved;
  return 100.0 * std::sqrt(sse / static_cast<double>(2 * set.size()));
}

}  // namespace gyrocal::nn
