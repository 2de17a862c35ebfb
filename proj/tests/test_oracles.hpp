#pragma once

// Test-only reference implementations and helpers. These stay deliberately
// naive and independent of the library's fast paths: the quadruple-loop
// convolution and block-mean pooling are the ground truth the production
// kernels are checked against, and the finite-difference probe is the ground
// truth for every analytic gradient.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gyrocal/nn/model.hpp"
#include "gyrocal/nn/ops.hpp"
#include "gyrocal/nn/tensor.hpp"
#include "gyrocal/rng.hpp"

namespace testutil {

using gyrocal::nn::Tensor;

/// Direct dot-product convolution, valid padding, stride 1.
inline Tensor conv2d_reference(const Tensor& x, const Tensor& k, const Tensor& bias) {
  const std::size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = k.dim(0), n = k.dim(2), m = k.dim(3);
  const std::size_t Ho = H - n + 1, Wo = W - m + 1;
  Tensor y = Tensor::zeros({B, Cout, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t co = 0; co < Cout; ++co)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          double acc = bias.values[co];
          for (std::size_t ci = 0; ci < Cin; ++ci)
            for (std::size_t a = 0; a < n; ++a)
              for (std::size_t bb = 0; bb < m; ++bb)
                acc += k.values[((co * Cin + ci) * n + a) * m + bb] *
                       x.values[((b * Cin + ci) * H + i + a) * W + j + bb];
          y.values[((b * Cout + co) * Ho + i) * Wo + j] = acc;
        }
  return y;
}

/// Brute-force block means with trailing remainder dropped.
inline Tensor avg_pool_reference(const Tensor& x, std::size_t pr, std::size_t pc) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = H / pr, Wo = W / pc;
  Tensor y = Tensor::zeros({B, C, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          double acc = 0.0;
          for (std::size_t r = 0; r < pr; ++r)
            for (std::size_t s = 0; s < pc; ++s)
              acc += x.values[((b * C + c) * H + i * pr + r) * W + j * pc + s];
          y.values[((b * C + c) * Ho + i) * Wo + j] =
              acc / static_cast<double>(pr * pc);
        }
  return y;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, gyrocal::Rng& rng,
                            double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = scale * rng.normal();
  return t;
}

/// Small config whose full forward fits a finite-difference sweep.
inline gyrocal::nn::ModelConfig reduced_config(double dropout_p = 0.0) {
  gyrocal::nn::ModelConfig cfg;
  cfg.window_len = 12;
  cfg.head_conv = {2, 5, 2};
  cfg.combined_conv = {2, 3, 2};
  cfg.pool = {1, 2};
  cfg.fc_hidden = 4;
  cfg.dropout_p = dropout_p;
  return cfg;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Central finite differences against the analytic backward pass, every
/// parameter element. Relative error uses max(|analytic|, |numeric|) with an
/// absolute floor for gradients at the finite-difference noise level.
inline GradCheckResult gradient_check(const gyrocal::nn::Model& base,
                                      const Tensor& batch, const Tensor& targets,
                                      std::uint64_t dropout_seed, double step = 1e-5,
                                      double abs_floor = 1e-8) {
  using gyrocal::nn::Model;
  using gyrocal::nn::ModelCache;

  Model analytic = base;
  ModelCache cache;
  gyrocal::nn::model_loss_forward(analytic, batch, targets, cache, dropout_seed);
  analytic.zero_grad();
  gyrocal::nn::model_backward(analytic, cache);

  GradCheckResult result;
  auto params = analytic.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& [name, tensor] = params[p];
    for (std::size_t i = 0; i < tensor->numel(); ++i) {
      auto probe = [&](double delta) {
        Model m = base;
        m.parameters()[p].second->values[i] += delta;
        ModelCache c;
        return gyrocal::nn::model_loss_forward(m, batch, targets, c, dropout_seed);
      };
      const double numeric = (probe(step) - probe(-step)) / (2.0 * step);
      const double analytic_g = tensor->grad[i];
      const double diff = std::abs(analytic_g - numeric);
      const double denom = std::max(std::abs(analytic_g), std::abs(numeric));
      const double rel = diff <= abs_floor ? 0.0 : diff / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = name + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace testutil
