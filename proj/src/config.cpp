#include "gyrocal/config.hpp"

#include <cstdio>
#include <fstream>

#include "gyrocal/errors.hpp"
#include "gyrocal/nn/model.hpp"

namespace gyrocal {

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["corpus"] = {{"n_scenarios", c.corpus.n_scenarios},
                 {"n_test", c.corpus.n_test},
                 {"rate_dps", c.corpus.rate_dps},
                 {"duration_s", c.corpus.duration_s},
                 {"fs_hz", c.corpus.fs_hz},
                 {"scale_range", {c.corpus.scale_range.first, c.corpus.scale_range.second}},
                 {"bias_range", {c.corpus.bias_range.first, c.corpus.bias_range.second}},
                 {"noise_sigma", c.corpus.noise_sigma}};
  j["pipeline"] = {{"segment_s", c.pipeline.segment_s},
                   {"usable_s", c.pipeline.usable_s},
                   {"window_len", c.pipeline.window_len},
                   {"stride", c.pipeline.stride},
                   {"split_ratio", c.pipeline.split_ratio}};
  j["model"] = nn::model_config_to_json(c.model);
  j["training"] = {{"lr", c.training.lr},
                   {"batch_size", c.training.batch_size},
                   {"max_epochs", c.training.max_epochs},
                   {"patience", c.training.patience}};
  j["seeds"] = {{"corpus", c.seeds.corpus},
                {"split", c.seeds.split},
                {"training", c.seeds.training}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    const auto& cj = j.at("corpus");
    c.corpus.n_scenarios = cj.at("n_scenarios").get<int>();
    c.corpus.n_test = cj.at("n_test").get<int>();
    c.corpus.rate_dps = cj.at("rate_dps").get<double>();
    c.corpus.duration_s = cj.at("duration_s").get<double>();
    c.corpus.fs_hz = cj.at("fs_hz").get<double>();
    c.corpus.scale_range = {cj.at("scale_range")[0].get<double>(),
                            cj.at("scale_range")[1].get<double>()};
    c.corpus.bias_range = {cj.at("bias_range")[0].get<double>(),
                           cj.at("bias_range")[1].get<double>()};
    c.corpus.noise_sigma = cj.at("noise_sigma").get<double>();

    const auto& pj = j.at("pipeline");
    c.pipeline.segment_s = pj.at("segment_s").get<double>();
    c.pipeline.usable_s = pj.at("usable_s").get<double>();
    c.pipeline.window_len = pj.at("window_len").get<std::size_t>();
    c.pipeline.stride = pj.at("stride").get<std::size_t>();
    c.pipeline.split_ratio = pj.at("split_ratio").get<double>();

    c.model = nn::model_config_from_json(j.at("model"));

    const auto& tj = j.at("training");
    c.training.lr = tj.at("lr").get<double>();
    c.training.batch_size = tj.at("batch_size").get<std::size_t>();
    c.training.max_epochs = tj.at("max_epochs").get<std::size_t>();
    c.training.patience = tj.at("patience").get<std::size_t>();

    const auto& sj = j.at("seeds");
    c.seeds.corpus = sj.at("corpus").get<std::uint64_t>();
    c.seeds.split = sj.at("split").get<std::uint64_t>();
    c.seeds.training = sj.at("training").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad run config: ") + e.what());
  }
  c.training.seed = c.seeds.training;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config parse error in " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write config " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::string config_hash(const RunConfig& config) {
  const std::string canonical = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gyrocal
