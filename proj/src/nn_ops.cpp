#include "gyrocal/nn/ops.hpp"

#include <cmath>
#include <span>
#include <stdexcept>

#include "gyrocal/numeric.hpp"
#include "gyrocal/rng.hpp"

namespace gyrocal::nn {

namespace {

/// Strip-mined dot product with eight independent accumulators. The fixed
/// association keeps results deterministic while letting the compiler map the
/// lanes onto SIMD units.
inline double dot8(const double* __restrict a, const double* __restrict b,
                   std::size_t n) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0, l4 = 0, l5 = 0, l6 = 0, l7 = 0;
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    l0 += a[j] * b[j];
    l1 += a[j + 1] * b[j + 1];
    l2 += a[j + 2] * b[j + 2];
    l3 += a[j + 3] * b[j + 3];
    l4 += a[j + 4] * b[j + 4];
    l5 += a[j + 5] * b[j + 5];
    l6 += a[j + 6] * b[j + 6];
    l7 += a[j + 7] * b[j + 7];
  }
  double s = ((l0 + l1) + (l2 + l3)) + ((l4 + l5) + (l6 + l7));
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

}  // namespace

Tensor fc_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_shape(x.shape.size() == 2, "fc input must be [batch, n_in]");
  check_shape(weight.shape.size() == 2, "fc weight must be [n_out, n_in]");
  const std::size_t batch = x.dim(0), n_in = x.dim(1);
  const std::size_t n_out = weight.dim(0);
  check_shape(weight.dim(1) == n_in, "fc weight columns vs input width");
  check_shape(bias.numel() == n_out, "fc bias length");

  Tensor y = Tensor::zeros({batch, n_out});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = &x.values[b * n_in];
    double* yr = &y.values[b * n_out];
    for (std::size_t i = 0; i < n_out; ++i) {
      yr[i] = bias.values[i] + dot8(&weight.values[i * n_in], xr, n_in);
    }
  }
  return y;
}

void fc_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                 Tensor& dx, std::vector<double>& dweight, std::vector<double>& dbias) {
  const std::size_t batch = x.dim(0), n_in = x.dim(1), n_out = weight.dim(0);
  check_shape(dy.shape == std::vector<std::size_t>({batch, n_out}), "fc dy");
  dx = Tensor::zeros({batch, n_in});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = &x.values[b * n_in];
    const double* dyr = &dy.values[b * n_out];
    double* dxr = &dx.values[b * n_in];
    for (std::size_t i = 0; i < n_out; ++i) {
      const double g = dyr[i];
      dbias[i] += g;
      const double* __restrict wr = &weight.values[i * n_in];
      double* __restrict dwr = &dweight[i * n_in];
      for (std::size_t j = 0; j < n_in; ++j) {
        dwr[j] += g * xr[j];
        dxr[j] += g * wr[j];
      }
    }
  }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  check_shape(x.shape.size() == 4, "conv input must be [B, Cin, H, W]");
  check_shape(kernel.shape.size() == 4, "conv kernel must be [Cout, Cin, n, m]");
  const std::size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = kernel.dim(0), n = kernel.dim(2), m = kernel.dim(3);
  check_shape(kernel.dim(1) == Cin, "conv kernel input channels");
  check_shape(bias.numel() == Cout, "conv bias length");
  if (n > H || m > W) {
    throw std::invalid_argument("conv2d: kernel larger than input");
  }
  const std::size_t Ho = H - n + 1, Wo = W - m + 1;

  Tensor y = Tensor::zeros({B, Cout, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < Cout; ++co) {
      double* ybase = &y.values[((b * Cout) + co) * Ho * Wo];
      const double bv = bias.values[co];
      for (std::size_t i = 0; i < Ho * Wo; ++i) ybase[i] = bv;
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const double* xbase = &x.values[((b * Cin) + ci) * H * W];
        const double* kbase = &kernel.values[((co * Cin) + ci) * n * m];
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t i = 0; i < Ho; ++i) {
            const double* xrow = xbase + (i + r) * W;
            double* __restrict yrow = ybase + i * Wo;
            for (std::size_t beta = 0; beta < m; ++beta) {
              const double w = kbase[r * m + beta];
              const double* __restrict xs = xrow + beta;
              for (std::size_t j = 0; j < Wo; ++j) yrow[j] += w * xs[j];
            }
          }
        }
      }
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy,
                     Tensor& dx, std::vector<double>& dkernel,
                     std::vector<double>& dbias) {
  const std::size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = kernel.dim(0), n = kernel.dim(2), m = kernel.dim(3);
  const std::size_t Ho = H - n + 1, Wo = W - m + 1;
  check_shape(dy.shape == std::vector<std::size_t>({B, Cout, Ho, Wo}), "conv dy");

  // Kernel and bias gradients: one dot product per kernel tap.
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < Cout; ++co) {
      const double* dybase = &dy.values[((b * Cout) + co) * Ho * Wo];
      double bias_acc = 0.0;
      for (std::size_t i = 0; i < Ho * Wo; ++i) bias_acc += dybase[i];
      dbias[co] += bias_acc;
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const double* xbase = &x.values[((b * Cin) + ci) * H * W];
        double* dkbase = &dkernel[((co * Cin) + ci) * n * m];
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t i = 0; i < Ho; ++i) {
            const double* xrow = xbase + (i + r) * W;
            const double* dyrow = dybase + i * Wo;
            for (std::size_t beta = 0; beta < m; ++beta) {
              dkbase[r * m + beta] += dot8(dyrow, xrow + beta, Wo);
            }
          }
        }
      }
    }
  }

  // Input gradients: pure elementwise scatter, vectorizes cleanly.
  dx = Tensor::zeros({B, Cin, H, W});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t ci = 0; ci < Cin; ++ci) {
      double* dxbase = &dx.values[((b * Cin) + ci) * H * W];
      for (std::size_t co = 0; co < Cout; ++co) {
        const double* dybase = &dy.values[((b * Cout) + co) * Ho * Wo];
        const double* kbase = &kernel.values[((co * Cin) + ci) * n * m];
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t i = 0; i < Ho; ++i) {
            double* __restrict dxrow = dxbase + (i + r) * W;
            const double* __restrict dyrow = dybase + i * Wo;
            for (std::size_t beta = 0; beta < m; ++beta) {
              const double w = kbase[r * m + beta];
              double* __restrict dxs = dxrow + beta;
              for (std::size_t j = 0; j < Wo; ++j) dxs[j] += w * dyrow[j];
            }
          }
        }
      }
    }
  }
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("leaky_relu: alpha must be >= 0");
  Tensor y = x;
  y.requires_grad = false;
  y.grad.clear();
  for (auto& v : y.values) {
    if (v < 0.0) v *= alpha;
  }
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& dy, double alpha) {
  check_shape(x.numel() == dy.numel(), "leaky_relu backward");
  Tensor dx = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    dx.values[i] = x.values[i] >= 0.0 ? dy.values[i] : alpha * dy.values[i];
  }
  return dx;
}

Tensor tanh_act(const Tensor& x) {
  Tensor y = x;
  y.requires_grad = false;
  y.grad.clear();
  for (auto& v : y.values) v = std::tanh(v);
  return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& dy) {
  check_shape(y.numel() == dy.numel(), "tanh backward");
  Tensor dx = Tensor::zeros(y.shape);
  for (std::size_t i = 0; i < y.numel(); ++i) {
    dx.values[i] = dy.values[i] * (1.0 - y.values[i] * y.values[i]);
  }
  return dx;
}

BatchNormParams BatchNormParams::make(std::size_t channels) {
  BatchNormParams p;
  p.gamma = Tensor::zeros({channels});
  p.beta = Tensor::zeros({channels});
  p.running_mean = Tensor::zeros({channels});
  p.running_var = Tensor::zeros({channels});
  for (auto& g : p.gamma.values) g = 1.0;
  for (auto& v : p.running_var.values) v = 1.0;
  return p;
}

Tensor batch_norm_forward(const Tensor& x, BatchNormParams& params, Mode mode,
                          double epsilon, double momentum, BatchNormCache* cache) {
  check_shape(x.shape.size() == 4, "batch_norm input must be [B, C, H, W]");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_shape(params.gamma.numel() == C, "batch_norm channel count");
  if (epsilon <= 0.0) throw std::invalid_argument("batch_norm: epsilon must be > 0");

  const std::size_t plane = H * W;
  const std::size_t per_channel = B * plane;
  if (mode == Mode::Train && per_channel < 2) {
    throw std::invalid_argument("batch_norm: train mode needs >= 2 values per channel");
  }

  Tensor y = Tensor::zeros(x.shape);
  if (cache) {
    cache->xhat.assign(x.numel(), 0.0);
    cache->inv_std.assign(C, 0.0);
    cache->mode = mode;
    cache->batch = B;
    cache->channels = C;
    cache->rows = H;
    cache->cols = W;
  }

  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      // Two-pass, compensated: stable statistics independent of batch layout.
      double sum = 0.0, carry = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* xp = &x.values[(b * C + c) * plane];
        for (std::size_t i = 0; i < plane; ++i) {
          double yv = xp[i] - carry;
          double t = sum + yv;
          carry = (t - sum) - yv;
          sum = t;
        }
      }
      mean = sum / static_cast<double>(per_channel);
      double sq = 0.0;
      carry = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* xp = &x.values[(b * C + c) * plane];
        for (std::size_t i = 0; i < plane; ++i) {
          double d = xp[i] - mean;
          double yv = d * d - carry;
          double t = sq + yv;
          carry = (t - sq) - yv;
          sq = t;
        }
      }
      var = sq / static_cast<double>(per_channel);  // biased, used for normalization
      double unbiased = per_channel > 1
                            ? sq / static_cast<double>(per_channel - 1)
                            : var;
      params.running_mean.values[c] =
          (1.0 - momentum) * params.running_mean.values[c] + momentum * mean;
      params.running_var.values[c] =
          (1.0 - momentum) * params.running_var.values[c] + momentum * unbiased;
    } else {
      mean = params.running_mean.values[c];
      var = params.running_var.values[c];
    }

    const double inv_std = 1.0 / std::sqrt(var + epsilon);
    const double g = params.gamma.values[c];
    const double beta = params.beta.values[c];
    if (cache) cache->inv_std[c] = inv_std;
    for (std::size_t b = 0; b < B; ++b) {
      const double* xp = &x.values[(b * C + c) * plane];
      double* yp = &y.values[(b * C + c) * plane];
      double* hp = cache ? &cache->xhat[(b * C + c) * plane] : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        double xhat = (xp[i] - mean) * inv_std;
        if (hp) hp[i] = xhat;
        yp[i] = g * xhat + beta;
      }
    }
  }
  return y;
}

void batch_norm_backward(const BatchNormCache& cache, const BatchNormParams& params,
                         const Tensor& dy, Tensor& dx, std::vector<double>& dgamma,
                         std::vector<double>& dbeta) {
  const std::size_t B = cache.batch, C = cache.channels;
  const std::size_t plane = cache.rows * cache.cols;
  const auto count = static_cast<double>(B * plane);
  check_shape(dy.numel() == B * C * plane, "batch_norm dy");

  dx = Tensor::zeros({B, C, cache.rows, cache.cols});
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* dyp = &dy.values[(b * C + c) * plane];
      const double* hp = &cache.xhat[(b * C + c) * plane];
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dyp[i];
        sum_dy_xhat += dyp[i] * hp[i];
      }
    }
    dgamma[c] += sum_dy_xhat;
    dbeta[c] += sum_dy;

    const double g_inv_std = params.gamma.values[c] * cache.inv_std[c];
    if (cache.mode == Mode::Train) {
      const double mean_dy = sum_dy / count;
      const double mean_dy_xhat = sum_dy_xhat / count;
      for (std::size_t b = 0; b < B; ++b) {
        const double* dyp = &dy.values[(b * C + c) * plane];
        const double* hp = &cache.xhat[(b * C + c) * plane];
        double* dxp = &dx.values[(b * C + c) * plane];
        for (std::size_t i = 0; i < plane; ++i) {
          dxp[i] = g_inv_std * (dyp[i] - mean_dy - hp[i] * mean_dy_xhat);
        }
      }
    } else {
      for (std::size_t b = 0; b < B; ++b) {
        const double* dyp = &dy.values[(b * C + c) * plane];
        double* dxp = &dx.values[(b * C + c) * plane];
        for (std::size_t i = 0; i < plane; ++i) dxp[i] = g_inv_std * dyp[i];
      }
    }
  }
}

Tensor avg_pool(const Tensor& x, std::size_t pool_rows, std::size_t pool_cols) {
  check_shape(x.shape.size() == 4, "avg_pool input must be [B, C, H, W]");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (pool_rows == 0 || pool_cols == 0 || pool_rows > H || pool_cols > W) {
    throw std::invalid_argument("avg_pool: pool larger than input");
  }
  const std::size_t Ho = H / pool_rows, Wo = W / pool_cols;
  const double inv = 1.0 / static_cast<double>(pool_rows * pool_cols);

  Tensor y = Tensor::zeros({B, C, Ho, Wo});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* xp = &x.values[bc * H * W];
    double* yp = &y.values[bc * Ho * Wo];
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < pool_rows; ++r) {
          const double* row = xp + (i * pool_rows + r) * W + j * pool_cols;
          for (std::size_t s = 0; s < pool_cols; ++s) acc += row[s];
        }
        yp[i * Wo + j] = acc * inv;
      }
    }
  }
  return y;
}

Tensor avg_pool_backward(const std::vector<std::size_t>& x_shape,
                         std::size_t pool_rows, std::size_t pool_cols,
                         const Tensor& dy) {
  const std::size_t B = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
  const std::size_t Ho = H / pool_rows, Wo = W / pool_cols;
  check_shape(dy.numel() == B * C * Ho * Wo, "avg_pool dy");
  const double inv = 1.0 / static_cast<double>(pool_rows * pool_cols);

  Tensor dx = Tensor::zeros({B, C, H, W});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* dyp = &dy.values[bc * Ho * Wo];
    double* dxp = &dx.values[bc * H * W];
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        const double g = dyp[i * Wo + j] * inv;
        for (std::size_t r = 0; r < pool_rows; ++r) {
          double* row = dxp + (i * pool_rows + r) * W + j * pool_cols;
          for (std::size_t s = 0; s < pool_cols; ++s) row[s] += g;
        }
      }
    }
  }
  return dx;
}

Tensor dropout_with_mask(const Tensor& x, double p, Mode mode, std::uint64_t rng_seed,
                         std::vector<std::uint8_t>& mask_out) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: need 0 <= p < 1");
  if (mode == Mode::Eval || p == 0.0) {
    mask_out.assign(x.numel(), 1);
    Tensor y = x;
    y.requires_grad = false;
    y.grad.clear();
    return y;
  }
  Rng rng(rng_seed);
  const double keep_scale = 1.0 / (1.0 - p);
  mask_out.assign(x.numel(), 0);
  Tensor y = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (rng.uniform01() >= p) {
      mask_out[i] = 1;
      y.values[i] = x.values[i] * keep_scale;
    }
  }
  return y;
}

Tensor dropout(const Tensor& x, double p, Mode mode, std::uint64_t rng_seed) {
  std::vector<std::uint8_t> mask;
  return dropout_with_mask(x, p, mode, rng_seed, mask);
}

Tensor dropout_backward(const std::vector<std::uint8_t>& mask, double p,
                        const Tensor& dy) {
  check_shape(mask.size() == dy.numel(), "dropout backward");
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor dx = Tensor::zeros(dy.shape);
  for (std::size_t i = 0; i < dy.numel(); ++i) {
    dx.values[i] = mask[i] ? dy.values[i] * keep_scale : 0.0;
  }
  return dx;
}

double loss_rmse100(const Tensor& pred, const Tensor& target) {
  check_shape(pred.shape == target.shape, "loss pred vs target");
  if (pred.numel() == 0) throw std::invalid_argument("loss_rmse100: empty batch");
  double sq = 0.0, carry = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    double d = pred.values[i] - target.values[i];
    double y = d * d - carry;
    double t = sq + y;
    carry = (t - sq) - y;
    sq = t;
  }
  return 100.0 * std::sqrt(sq / static_cast<double>(pred.numel()));
}

Tensor loss_rmse100_backward(const Tensor& pred, const Tensor& target, double loss,
                             double loss_scale) {
  Tensor dpred = Tensor::zeros(pred.shape);
  if (loss == 0.0) return dpred;
  const auto n = static_cast<double>(pred.numel());
  // d loss / d pred_i = 100^2 * (pred_i - target_i) / (n * loss)
  const double k = loss_scale * 1e4 / (n * loss);
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    dpred.values[i] = k * (pred.values[i] - target.values[i]);
  }
  return dpred;
}

}  // namespace gyrocal::nn
