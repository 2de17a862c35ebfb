#pragma once

#include <cstdint>
#include <vector>

#include "gyrocal/nn/tensor.hpp"

namespace gyrocal::nn {

enum class Mode { Train, Eval };

// Forward kernels and their matching backward passes. Backward functions
// accumulate (+=) into parameter gradient buffers and overwrite input
// gradients, so a caller zeroes parameter grads once per step.

/// y[b,i] = sum_j W[i,j] * x[b,j] + bias[i].  x: [B, n_in], W: [n_out, n_in].
Tensor fc_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
void fc_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                 Tensor& dx, std::vector<double>& dweight, std::vector<double>& dbias);

/// Valid-padding stride-1 cross-correlation summed over input channels.
/// x: [B, Cin, H, W], kernel: [Cout, Cin, n, m], bias: [Cout]
/// -> [B, Cout, H-n+1, W-m+1]. Throws when the kernel exceeds the input.
Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias);
void conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy,
                     Tensor& dx, std::vector<double>& dkernel,
                     std::vector<double>& dbias);

/// Elementwise x if x >= 0 else alpha * x.
Tensor leaky_relu(const Tensor& x, double alpha);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& dy, double alpha);

Tensor tanh_act(const Tensor& x);
/// dx from the forward *output* y: dx = dy * (1 - y^2).
Tensor tanh_backward(const Tensor& y, const Tensor& dy);

/// Learnable per-channel affine normalization state. Running statistics are
/// buffers, not parameters: they track batch statistics for Eval mode.
struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

  static BatchNormParams make(std::size_t channels);
};

struct BatchNormCache {
  std::vector<double> xhat;
  std::vector<double> inv_std;  // per channel
  Mode mode = Mode::Train;
  std::size_t batch = 0, channels = 0, rows = 0, cols = 0;
};

/// Train mode: normalizes with per-channel batch statistics over
/// (batch, H, W), then scales by gamma and shifts by beta; running statistics
/// are blended with factor `momentum` (unbiased variance for the running
/// buffer). Eval mode: uses the running statistics. Train mode requires at
/// least two values per channel.
Tensor batch_norm_forward(const Tensor& x, BatchNormParams& params, Mode mode,
                          double epsilon, double momentum, BatchNormCache* cache);
void batch_norm_backward(const BatchNormCache& cache, const BatchNormParams& params,
                         const Tensor& dy, Tensor& dx, std::vector<double>& dgamma,
                         std::vector<double>& dbeta);

/// Mean over non-overlapping pool_rows x pool_cols blocks, stride equal to the
/// block size; trailing remainder rows/columns are dropped.
Tensor avg_pool(const Tensor& x, std::size_t pool_rows, std::size_t pool_cols);
Tensor avg_pool_backward(const std::vector<std::size_t>& x_shape,
                         std::size_t pool_rows, std::size_t pool_cols,
                         const Tensor& dy);

/// Inverted dropout: in Train mode each element is zeroed with probability p
/// and survivors are scaled by 1/(1-p); Eval mode is the identity. The mask is
/// a pure function of rng_seed.
Tensor dropout(const Tensor& x, double p, Mode mode, std::uint64_t rng_seed);
Tensor dropout_with_mask(const Tensor& x, double p, Mode mode, std::uint64_t rng_seed,
                         std::vector<std::uint8_t>& mask_out);
Tensor dropout_backward(const std::vector<std::uint8_t>& mask, double p,
                        const Tensor& dy);

/// 100 * sqrt(mean of squared residuals over all elements of the batch).
double loss_rmse100(const Tensor& pred, const Tensor& target);
/// d(loss_scale * loss)/d(pred). Zero when the loss is exactly zero.
Tensor loss_rmse100_backward(const Tensor& pred, const Tensor& target, double loss,
                             double loss_scale = 1.0);

}  // namespace gyrocal::nn
