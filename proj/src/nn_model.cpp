#include "gyrocal/nn/model.hpp"

#include <cmath>
#include <fstream>

#include "gyrocal/errors.hpp"
#include "gyrocal/rng.hpp"

namespace gyrocal::nn {

namespace {

constexpr const char* kCheckpointSchema = "gyrocal.checkpoint.v1";

/// Output width of one conv+pool stage on a width-w input.
std::size_t stage_width(std::size_t w, const ConvSpec& conv, const PoolSpec& pool) {
  if (conv.kernel_cols > w) {
    throw std::invalid_argument("config: conv kernel wider than its input");
  }
  std::size_t conv_w = w - conv.kernel_cols + 1;
  if (pool.cols > conv_w) {
    throw std::invalid_argument("config: pool wider than conv output");
  }
  return conv_w / pool.cols;
}

void fill_fan_in_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values) v = rng.uniform_in(-bound, bound);
}

Tensor slice_rows(const Tensor& batch, std::size_t row_a, std::size_t row_b) {
  const std::size_t B = batch.dim(0), W = batch.dim(2);
  Tensor out = Tensor::zeros({B, 1, 2, W});
  for (std::size_t b = 0; b < B; ++b) {
    const double* src = &batch.values[b * 3 * W];
    double* dst = &out.values[b * 2 * W];
    for (std::size_t j = 0; j < W; ++j) dst[j] = src[row_a * W + j];
    for (std::size_t j = 0; j < W; ++j) dst[W + j] = src[row_b * W + j];
  }
  return out;
}

Tensor head_forward(HeadParams& head, const Tensor& input, const ModelConfig& cfg,
                    Mode mode, ModelCache::HeadCache* cache) {
  Tensor bn_out = batch_norm_forward(input, head.bn, mode, cfg.bn_epsilon,
                                     cfg.bn_momentum, cache ? &cache->bn : nullptr);
  Tensor conv_out = conv2d_forward(bn_out, head.conv_weight, head.conv_bias);
  Tensor pool_out = avg_pool(conv_out, cfg.pool.rows, cfg.pool.cols);
  Tensor out = leaky_relu(pool_out, cfg.leaky_alpha);
  if (cache) {
    cache->bn_out = std::move(bn_out);
    cache->conv_out = std::move(conv_out);
    cache->pool_out = std::move(pool_out);
  }
  return out;
}

/// Backward through one head given d(head output); returns d(head input).
Tensor head_backward(HeadParams& head, const Tensor& head_input,
                     ModelCache::HeadCache& cache, const Tensor& dout,
                     const ModelConfig& cfg) {
  Tensor d_pool = leaky_relu_backward(cache.pool_out, dout, cfg.leaky_alpha);
  Tensor d_conv =
      avg_pool_backward(cache.conv_out.shape, cfg.pool.rows, cfg.pool.cols, d_pool);
  Tensor d_bn_out;
  conv2d_backward(cache.bn_out, head.conv_weight, d_conv, d_bn_out,
                  head.conv_weight.grad, head.conv_bias.grad);
  Tensor d_in;
  batch_norm_backward(cache.bn, head.bn, d_bn_out, d_in, head.bn.gamma.grad,
                      head.bn.beta.grad);
  (void)head_input;
  return d_in;
}

}  // namespace

void validate_config(const ModelConfig& config) {
  if (config.head_conv.kernel_rows != 2) {
    throw std::invalid_argument("config: head conv kernel height must be 2");
  }
  if (config.dropout_p < 0.0 || config.dropout_p >= 1.0) {
    throw std::invalid_argument("config: need 0 <= dropout_p < 1");
  }
  if (config.bn_epsilon <= 0.0) {
    throw std::invalid_argument("config: bn_epsilon must be > 0");
  }
  if (config.window_len == 0 || config.fc_hidden == 0 ||
      config.head_conv.out_channels == 0 || config.combined_conv.out_channels == 0) {
    throw std::invalid_argument("config: zero-sized dimension");
  }
  flattened_features(config);  // throws when the shapes do not compose
}

std::size_t flattened_features(const ModelConfig& config) {
  // Head: [1, 2, W] -> conv(2 x kc) -> [C, 1, W'] -> pool -> [C, 1, W'/pc].
  std::size_t head_w = stage_width(config.window_len, config.head_conv, config.pool);
  if (config.pool.rows > 1) {
    throw std::invalid_argument("config: pool rows > 1 would erase the height-1 maps");
  }
  // Concatenated heads: [C, 2, head_w]; combined conv consumes both rows.
  if (config.combined_conv.kernel_rows != 2) {
    throw std::invalid_argument("config: combined conv kernel height must be 2");
  }
  std::size_t comb_w = stage_width(head_w, config.combined_conv, config.pool);
  if (comb_w == 0) {
    throw std::invalid_argument("config: feature map collapses to zero width");
  }
  return config.combined_conv.out_channels * comb_w;
}

std::vector<std::pair<std::string, Tensor*>> Model::parameters() {
  return {
      {"up_head.bn.gamma", &up_head.bn.gamma},
      {"up_head.bn.beta", &up_head.bn.beta},
      {"up_head.conv.weight", &up_head.conv_weight},
      {"up_head.conv.bias", &up_head.conv_bias},
      {"down_head.bn.gamma", &down_head.bn.gamma},
      {"down_head.bn.beta", &down_head.bn.beta},
      {"down_head.conv.weight", &down_head.conv_weight},
      {"down_head.conv.bias", &down_head.conv_bias},
      {"combined.bn.gamma", &combined.bn.gamma},
      {"combined.bn.beta", &combined.bn.beta},
      {"combined.conv.weight", &combined.conv_weight},
      {"combined.conv.bias", &combined.conv_bias},
      {"fc1.weight", &fc1_weight},
      {"fc1.bias", &fc1_bias},
      {"fc2.weight", &fc2_weight},
      {"fc2.bias", &fc2_bias},
  };
}

std::vector<std::pair<std::string, const Tensor*>> Model::parameters() const {
  auto mutable_list = const_cast<Model*>(this)->parameters();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, t] : mutable_list) out.emplace_back(name, t);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::buffers() {
  return {
      {"up_head.bn.running_mean", &up_head.bn.running_mean},
      {"up_head.bn.running_var", &up_head.bn.running_var},
      {"down_head.bn.running_mean", &down_head.bn.running_mean},
      {"down_head.bn.running_var", &down_head.bn.running_var},
      {"combined.bn.running_mean", &combined.bn.running_mean},
      {"combined.bn.running_var", &combined.bn.running_var},
  };
}

std::vector<std::pair<std::string, const Tensor*>> Model::buffers() const {
  auto mutable_list = const_cast<Model*>(this)->buffers();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, t] : mutable_list) out.emplace_back(name, t);
  return out;
}

void Model::zero_grad() {
  for (auto& [name, t] : parameters()) t->zero_grad();
}

Model make_model(const ModelConfig& config) {
  validate_config(config);
  Model m;
  m.config = config;

  auto make_head = [&](std::size_t in_channels, const ConvSpec& conv) {
    HeadParams h;
    h.bn = BatchNormParams::make(in_channels);
    h.conv_weight = Tensor::zeros(
        {conv.out_channels, in_channels, conv.kernel_rows, conv.kernel_cols});
    h.conv_bias = Tensor::zeros({conv.out_channels});
    return h;
  };
  m.up_head = make_head(1, config.head_conv);
  m.down_head = make_head(1, config.head_conv);
  m.combined = make_head(config.head_conv.out_channels, config.combined_conv);

  const std::size_t features = flattened_features(config);
  m.fc1_weight = Tensor::zeros({config.fc_hidden, features});
  m.fc1_bias = Tensor::zeros({config.fc_hidden});
  m.fc2_weight = Tensor::zeros({2, config.fc_hidden});
  m.fc2_bias = Tensor::zeros({2});

  for (auto& [name, t] : m.parameters()) t->set_requires_grad();
  return m;
}

void init_params(Model& model, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1217));

  auto reset_head = [&](HeadParams& head) {
    const std::size_t channels = head.bn.gamma.numel();
    head.bn = BatchNormParams::make(channels);
    const auto& ws = head.conv_weight.shape;
    std::size_t fan_in = ws[1] * ws[2] * ws[3];
    fill_fan_in_uniform(head.conv_weight, fan_in, rng);
    head.conv_bias.values.assign(head.conv_bias.numel(), 0.0);
  };
  reset_head(model.up_head);
  reset_head(model.down_head);
  reset_head(model.combined);

  fill_fan_in_uniform(model.fc1_weight, model.fc1_weight.dim(1), rng);
  model.fc1_bias.values.assign(model.fc1_bias.numel(), 0.0);
  fill_fan_in_uniform(model.fc2_weight, model.fc2_weight.dim(1), rng);
  model.fc2_bias.values.assign(model.fc2_bias.numel(), 0.0);

  for (auto& [name, t] : model.parameters()) t->set_requires_grad();
  model.zero_grad();
}

namespace {

Tensor forward_impl(Model& model, const Tensor& batch, std::uint64_t dropout_seed,
                    ModelCache* cache) {
  const auto& cfg = model.config;
  check_shape(batch.shape.size() == 3 && batch.dim(1) == 3 &&
                  batch.dim(2) == cfg.window_len,
              "model input must be [batch, 3, window_len]");
  const std::size_t B = batch.dim(0);
  if (B == 0) throw std::invalid_argument("model_forward: empty batch");

  Tensor up_in = slice_rows(batch, 0, 2);
  Tensor down_in = slice_rows(batch, 1, 2);

  Tensor up_out = head_forward(model.up_head, up_in, cfg, model.mode,
                               cache ? &cache->up : nullptr);
  Tensor down_out = head_forward(model.down_head, down_in, cfg, model.mode,
                                 cache ? &cache->down : nullptr);

  // Stack along the height axis: row 0 carries the up stream, row 1 the down
  // stream, per feature channel.
  const std::size_t C = up_out.dim(1), Wp = up_out.dim(3);
  Tensor concat = Tensor::zeros({B, C, 2, Wp});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* us = &up_out.values[(b * C + c) * Wp];
      const double* ds = &down_out.values[(b * C + c) * Wp];
      double* dst = &concat.values[(b * C + c) * 2 * Wp];
      for (std::size_t j = 0; j < Wp; ++j) dst[j] = us[j];
      for (std::size_t j = 0; j < Wp; ++j) dst[Wp + j] = ds[j];
    }
  }

  Tensor comb_out = head_forward(model.combined, concat, cfg, model.mode,
                                 cache ? &cache->comb : nullptr);

  const std::size_t features = comb_out.numel() / B;
  Tensor flat = std::move(comb_out);
  flat.shape = {B, features};

  Tensor fc1_out = fc_forward(flat, model.fc1_weight, model.fc1_bias);
  Tensor tanh_out = tanh_act(fc1_out);
  std::vector<std::uint8_t> mask;
  Tensor dropped =
      dropout_with_mask(tanh_out, cfg.dropout_p, model.mode, dropout_seed, mask);
  Tensor pred = fc_forward(dropped, model.fc2_weight, model.fc2_bias);

  if (cache) {
    cache->up_in = std::move(up_in);
    cache->down_in = std::move(down_in);
    cache->concat = std::move(concat);
    cache->flat = std::move(flat);
    cache->fc1_out = std::move(fc1_out);
    cache->tanh_out = std::move(tanh_out);
    cache->dropout_mask = std::move(mask);
    cache->dropped = std::move(dropped);
    cache->pred = pred;
  }
  return pred;
}

}  // namespace

Tensor model_forward(Model& model, const Tensor& batch, std::uint64_t dropout_seed) {
  return forward_impl(model, batch, dropout_seed, nullptr);
}

double model_loss_forward(Model& model, const Tensor& batch, const Tensor& targets,
                          ModelCache& cache, std::uint64_t dropout_seed) {
  check_shape(targets.shape.size() == 2 && targets.dim(1) == 2 &&
                  targets.dim(0) == batch.dim(0),
              "targets must be [batch, 2]");
  forward_impl(model, batch, dropout_seed, &cache);
  cache.target = targets;
  cache.loss = loss_rmse100(cache.pred, targets);
  cache.valid = true;
  return cache.loss;
}

void model_backward(Model& model, ModelCache& cache, double loss_scale) {
  if (!cache.valid) {
    throw std::logic_error("model_backward called before a recorded forward pass");
  }
  const auto& cfg = model.config;
  const std::size_t B = cache.pred.dim(0);

  Tensor dpred = loss_rmse100_backward(cache.pred, cache.target, cache.loss, loss_scale);

  Tensor d_dropped;
  fc_backward(cache.dropped, model.fc2_weight, dpred, d_dropped,
              model.fc2_weight.grad, model.fc2_bias.grad);
  Tensor d_tanh_out = dropout_backward(cache.dropout_mask, cfg.dropout_p, d_dropped);
  Tensor d_fc1_out = tanh_backward(cache.tanh_out, d_tanh_out);
  Tensor d_flat;
  fc_backward(cache.flat, model.fc1_weight, d_fc1_out, d_flat,
              model.fc1_weight.grad, model.fc1_bias.grad);

  Tensor d_comb_out = std::move(d_flat);
  const std::size_t comb_w = cache.comb.pool_out.dim(3);
  d_comb_out.shape = {B, cfg.combined_conv.out_channels, 1, comb_w};

  Tensor d_concat =
      head_backward(model.combined, cache.concat, cache.comb, d_comb_out, cfg);

  const std::size_t C = cfg.head_conv.out_channels;
  const std::size_t Wp = d_concat.dim(3);
  Tensor d_up_out = Tensor::zeros({B, C, 1, Wp});
  Tensor d_down_out = Tensor::zeros({B, C, 1, Wp});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = &d_concat.values[(b * C + c) * 2 * Wp];
      double* du = &d_up_out.values[(b * C + c) * Wp];
      double* dd = &d_down_out.values[(b * C + c) * Wp];
      for (std::size_t j = 0; j < Wp; ++j) du[j] = src[j];
      for (std::size_t j = 0; j < Wp; ++j) dd[j] = src[Wp + j];
    }
  }

  head_backward(model.up_head, cache.up_in, cache.up, d_up_out, cfg);
  head_backward(model.down_head, cache.down_in, cache.down, d_down_out, cfg);
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"window_len", c.window_len},
          {"head_conv", {{"kernel_rows", c.head_conv.kernel_rows},
                         {"kernel_cols", c.head_conv.kernel_cols},
                         {"out_channels", c.head_conv.out_channels}}},
          {"combined_conv", {{"kernel_rows", c.combined_conv.kernel_rows},
                             {"kernel_cols", c.combined_conv.kernel_cols},
                             {"out_channels", c.combined_conv.out_channels}}},
          {"pool", {{"rows", c.pool.rows}, {"cols", c.pool.cols}}},
          {"fc_hidden", c.fc_hidden},
          {"dropout_p", c.dropout_p},
          {"leaky_alpha", c.leaky_alpha},
          {"bn_epsilon", c.bn_epsilon},
          {"bn_momentum", c.bn_momentum}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.window_len = j.at("window_len").get<std::size_t>();
    c.head_conv = {j.at("head_conv").at("kernel_rows").get<std::size_t>(),
                   j.at("head_conv").at("kernel_cols").get<std::size_t>(),
                   j.at("head_conv").at("out_channels").get<std::size_t>()};
    c.combined_conv = {j.at("combined_conv").at("kernel_rows").get<std::size_t>(),
                       j.at("combined_conv").at("kernel_cols").get<std::size_t>(),
                       j.at("combined_conv").at("out_channels").get<std::size_t>()};
    c.pool = {j.at("pool").at("rows").get<std::size_t>(),
              j.at("pool").at("cols").get<std::size_t>()};
    c.fc_hidden = j.at("fc_hidden").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.leaky_alpha = j.at("leaky_alpha").get<double>();
    c.bn_epsilon = j.at("bn_epsilon").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     std::uint64_t seed, const std::string& config_hash) {
  nlohmann::json j;
  j["schema"] = kCheckpointSchema;
  j["config"] = model_config_to_json(model.config);
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : model.parameters()) params[name] = t->values;
  j["params"] = std::move(params);
  nlohmann::json buffers = nlohmann::json::object();
  for (const auto& [name, t] : model.buffers()) buffers[name] = t->values;
  j["buffers"] = std::move(buffers);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint parse error in " + path.string() + ": " + e.what());
  }
  if (j.value("schema", "") != kCheckpointSchema) {
    throw DataError("unexpected checkpoint schema in " + path.string());
  }

  Model model = make_model(model_config_from_json(j.at("config")));
  auto load_into = [&](const nlohmann::json& src, const std::string& name, Tensor* t) {
    if (!src.contains(name)) throw DataError("checkpoint missing tensor " + name);
    auto vals = src.at(name).get<std::vector<double>>();
    if (vals.size() != t->numel()) {
      throw DataError("checkpoint tensor " + name + " has wrong size");
    }
    t->values = std::move(vals);
  };
  for (auto& [name, t] : model.parameters()) load_into(j.at("params"), name, t);
  for (auto& [name, t] : model.buffers()) load_into(j.at("buffers"), name, t);
  model.eval();
  return model;
}

}  // namespace gyrocal::nn
