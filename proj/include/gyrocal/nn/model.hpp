#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gyrocal/nn/ops.hpp"
#include "gyrocal/nn/tensor.hpp"

namespace gyrocal::nn {

struct ConvSpec {
  std::size_t kernel_rows = 2;
  std::size_t kernel_cols = 15;
  std::size_t out_channels = 16;
};

struct PoolSpec {
  std::size_t rows = 1;
  std::size_t cols = 4;
};

/// Architecture knobs. The head kernel height is pinned to 2 so each head
/// consumes its (measurement, reference-rate) row pair in one stroke.
struct ModelConfig {
  std::size_t window_len = 290;
  ConvSpec head_conv{2, 15, 16};
  ConvSpec combined_conv{2, 7, 32};
  PoolSpec pool{1, 4};
  std::size_t fc_hidden = 64;
  double dropout_p = 0.2;
  double leaky_alpha = 0.01;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
};

void validate_config(const ModelConfig& config);

/// Width of the flattened feature vector entering fc1, from composing the
/// valid-padding convolution and pooling size formulas layer by layer.
std::size_t flattened_features(const ModelConfig& config);

struct HeadParams {
  BatchNormParams bn;
  Tensor conv_weight;
  Tensor conv_bias;
};

/// The two-head calibration network. Input batches are [B, 3, W] with row 0
/// the up measurements, row 1 the down measurements and row 2 the constant
/// reference rate. Each head runs BN -> conv -> avg-pool -> LeakyReLU on its
/// (measurement, reference) plane; head outputs are stacked along the height
/// axis and run through the combined head, then flatten -> fc -> Tanh ->
/// dropout -> fc to the (scale, bias) estimate.
struct Model {
  ModelConfig config;
  HeadParams up_head;
  HeadParams down_head;
  HeadParams combined;
  Tensor fc1_weight, fc1_bias;
  Tensor fc2_weight, fc2_bias;
  Mode mode = Mode::Train;

  void train() { mode = Mode::Train; }
  void eval() { mode = Mode::Eval; }

  /// Learnable parameters in a stable, named order.
  std::vector<std::pair<std::string, Tensor*>> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
  /// Non-learnable running statistics.
  std::vector<std::pair<std::string, Tensor*>> buffers();
  std::vector<std::pair<std::string, const Tensor*>> buffers() const;

  void zero_grad();
};

/// Allocates all parameter buffers for the given config (zero-valued).
Model make_model(const ModelConfig& config);

/// Fan-in-scaled uniform init for conv/fc weights, zero biases, gamma = 1,
/// beta = 0, running stats reset. Deterministic per seed.
void init_params(Model& model, std::uint64_t seed);

/// Everything the backward pass needs from one forward pass.
struct ModelCache {
  bool valid = false;
  Tensor up_in, down_in;
  struct HeadCache {
    BatchNormCache bn;
    Tensor bn_out;
    Tensor conv_out;
    Tensor pool_out;
  } up, down, comb;
  Tensor concat;
  Tensor flat;
  Tensor fc1_out;
  Tensor tanh_out;
  std::vector<std::uint8_t> dropout_mask;
  Tensor dropped;
  Tensor pred;
  Tensor target;
  double loss = 0.0;
};

/// Forward pass respecting model.mode; returns [B, 2] estimates
/// (column 0 scale fraction, column 1 bias DPS).
Tensor model_forward(Model& model, const Tensor& batch, std::uint64_t dropout_seed = 0);

/// Forward plus loss_rmse100 against targets, recording a cache for backward.
double model_loss_forward(Model& model, const Tensor& batch, const Tensor& targets,
                          ModelCache& cache, std::uint64_t dropout_seed = 0);

/// Reverse-mode gradients of (loss_scale * loss) w.r.t. every parameter,
/// accumulated into the parameter grad buffers. Requires a recorded forward.
void model_backward(Model& model, ModelCache& cache, double loss_scale = 1.0);

// --- checkpointing ---

/// Single self-describing JSON file: config, parameters, running statistics,
/// training seed. Reloading reproduces Eval outputs bit-identically.
void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     std::uint64_t seed, const std::string& config_hash);
Model load_checkpoint(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace gyrocal::nn
