#include "gyrocal/pipeline.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gyrocal/calibration.hpp"
#include "gyrocal/errors.hpp"
#include "gyrocal/rng.hpp"

namespace gyrocal {

namespace {

constexpr const char* kCorpusSchema = "gyrocal.corpus.v1";
constexpr const char* kDatasetSchema = "gyrocal.dataset.v1";
constexpr std::uint64_t kTermsStream = 0x7E51;
constexpr std::uint64_t kScenarioStream = 0x5C17;

std::string scenario_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "scn_%03d", i);
  return buf;
}

void write_points(std::ofstream& out, const std::vector<DataPoint>& points) {
  for (const auto& p : points) {
    out.write(reinterpret_cast<const char*>(p.window.data()),
              static_cast<std::streamsize>(p.window.size() * sizeof(double)));
    double label[2] = {p.label.scale, p.label.bias};
    out.write(reinterpret_cast<const char*>(label), sizeof(label));
  }
}

nlohmann::json points_index(const std::vector<DataPoint>& points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : points) {
    arr.push_back({{"scenario_id", p.scenario_id},
                   {"segment", p.segment_index},
                   {"window", p.window_index}});
  }
  return arr;
}

}  // namespace

ScaleBias label_scenario(const Scenario& scenario) {
  const double duration = scenario.duration_s();
  double mu_up = mean_window(scenario.up, 0.0, duration);
  double mu_down = mean_window(scenario.down, 0.0, duration);
  CalibrationResult result =
      calibrate_single_axis(mu_up, mu_down, scenario.rate_dps(), duration);
  return {result.scale, result.bias};
}

std::vector<SegmentPair> segment_scenario(const Scenario& scenario, double segment_s,
                                          double usable_s) {
  if (!(segment_s > 0.0) || !(usable_s >= segment_s)) {
    throw std::invalid_argument("segment_scenario: bad segment/usable lengths");
  }
  if (scenario.duration_s() + 1e-9 < usable_s) {
    throw std::invalid_argument("segment_scenario: scenario shorter than usable span");
  }
  if (!scenario.labels) {
    throw std::invalid_argument("segment_scenario: scenario has no label");
  }

  const double fs = scenario.fs_hz();
  const auto seg_len = static_cast<std::size_t>(std::llround(segment_s * fs));
  const auto n_segments = static_cast<std::size_t>(usable_s / segment_s);

  std::vector<SegmentPair> segments;
  segments.reserve(n_segments);
  for (std::size_t k = 0; k < n_segments; ++k) {
    SegmentPair seg;
    seg.fs_hz = fs;
    seg.rate_dps = scenario.rate_dps();
    seg.scenario_id = scenario.id;
    seg.segment_index = k;
    seg.label = *scenario.labels;
    const std::size_t begin = k * seg_len;
    seg.up.assign(scenario.up.samples.begin() + begin,
                  scenario.up.samples.begin() + begin + seg_len);
    seg.down.assign(scenario.down.samples.begin() + begin,
                    scenario.down.samples.begin() + begin + seg_len);
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<DataPoint> window_segment(const SegmentPair& segment,
                                      std::size_t window_len, std::size_t stride) {
  if (segment.up.size() != segment.down.size()) {
    throw std::invalid_argument("window_segment: up/down length mismatch");
  }
  if (segment.up.size() < window_len) {
    throw std::invalid_argument("window_segment: segment shorter than window");
  }
  if (stride == 0) throw std::invalid_argument("window_segment: zero stride");

  const std::size_t n_windows = (segment.up.size() - window_len) / stride + 1;
  std::vector<DataPoint> points;
  points.reserve(n_windows);
  for (std::size_t w = 0; w < n_windows; ++w) {
    const std::size_t off = w * stride;
    DataPoint p;
    p.window_len = window_len;
    p.window.resize(3 * window_len);
    std::copy_n(segment.up.begin() + off, window_len, p.window.begin());
    std::copy_n(segment.down.begin() + off, window_len, p.window.begin() + window_len);
    std::fill_n(p.window.begin() + 2 * window_len, window_len, segment.rate_dps);
    p.label = segment.label;
    p.scenario_id = segment.scenario_id;
    p.segment_index = segment.segment_index;
    p.window_index = w;
    points.push_back(std::move(p));
  }
  return points;
}

DatasetSplit split_train_val(std::vector<DataPoint> points, double ratio,
                             std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("split_train_val: empty input");
  if (!(ratio > 0.0) || !(ratio < 1.0)) {
    throw std::invalid_argument("split_train_val: ratio must be in (0, 1)");
  }
  Rng rng(seed);
  rng.shuffle(points);

  const auto n_train =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(points.size())));
  DatasetSplit split;
  split.split_seed = seed;
  split.train.assign(points.begin(), points.begin() + n_train);
  split.val.assign(points.begin() + n_train, points.end());
  return split;
}

Corpus generate_corpus(const CorpusConfig& config, std::uint64_t seed) {
  if (config.n_scenarios < 1) {
    throw std::invalid_argument("generate_corpus: n_scenarios must be >= 1");
  }
  if (config.n_test < 0 || config.n_test >= config.n_scenarios) {
    throw std::invalid_argument("generate_corpus: n_test out of range");
  }

  Corpus corpus;
  corpus.config = config;
  corpus.seed = seed;
  corpus.scenarios.reserve(static_cast<std::size_t>(config.n_scenarios));
  for (int i = 0; i < config.n_scenarios; ++i) {
    GyroErrorTerms terms = sample_error_terms(
        derive_seed(seed, kTermsStream + static_cast<std::uint64_t>(i)),
        config.scale_range, config.bias_range, config.noise_sigma);
    Scenario scenario = generate_scenario(
        config.rate_dps, config.duration_s, config.fs_hz, terms,
        derive_seed(seed, kScenarioStream + static_cast<std::uint64_t>(i)));
    scenario.id = scenario_name(i);
    scenario.labels = label_scenario(scenario);
    corpus.scenarios.push_back(std::move(scenario));
  }

  const auto n = static_cast<std::size_t>(config.n_scenarios);
  const auto n_test = static_cast<std::size_t>(config.n_test);
  for (std::size_t i = 0; i < n - n_test; ++i) corpus.train_indices.push_back(i);
  for (std::size_t i = n - n_test; i < n; ++i) corpus.test_indices.push_back(i);
  return corpus;
}

std::filesystem::path write_corpus(const Corpus& corpus,
                                   const std::filesystem::path& out_dir,
                                   const std::string& config_hash) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create directory " + out_dir.string());

  nlohmann::json manifest;
  manifest["schema"] = kCorpusSchema;
  manifest["seed"] = corpus.seed;
  manifest["config_hash"] = config_hash;
  manifest["config"] = {
      {"n_scenarios", corpus.config.n_scenarios},
      {"n_test", corpus.config.n_test},
      {"rate_dps", corpus.config.rate_dps},
      {"duration_s", corpus.config.duration_s},
      {"fs_hz", corpus.config.fs_hz},
      {"scale_range", {corpus.config.scale_range.first, corpus.config.scale_range.second}},
      {"bias_range", {corpus.config.bias_range.first, corpus.config.bias_range.second}},
      {"noise_sigma", corpus.config.noise_sigma}};

  nlohmann::json entries = nlohmann::json::array();
  for (const auto& scenario : corpus.scenarios) {
    const std::string up_file = scenario.id + "_up.csv";
    const std::string down_file = scenario.id + "_down.csv";
    write_recording_csv(scenario.up, out_dir / up_file);
    write_recording_csv(scenario.down, out_dir / down_file);
    entries.push_back(scenario_manifest_entry(scenario, up_file, down_file));
  }
  manifest["scenarios"] = std::move(entries);

  nlohmann::json train_ids = nlohmann::json::array();
  for (auto i : corpus.train_indices) train_ids.push_back(corpus.scenarios[i].id);
  nlohmann::json test_ids = nlohmann::json::array();
  for (auto i : corpus.test_indices) test_ids.push_back(corpus.scenarios[i].id);
  manifest["train_ids"] = std::move(train_ids);
  manifest["test_ids"] = std::move(test_ids);

  const auto manifest_path = out_dir / "corpus_manifest.json";
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("manifest write failed: " + manifest_path.string());
  return manifest_path;
}

Corpus load_corpus(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest parse error in " + manifest_path.string() + ": " +
                    e.what());
  }
  if (manifest.value("schema", "") != kCorpusSchema) {
    throw DataError("unexpected corpus schema in " + manifest_path.string());
  }

  Corpus corpus;
  try {
    corpus.seed = manifest.at("seed").get<std::uint64_t>();
    const auto& cj = manifest.at("config");
    corpus.config.n_scenarios = cj.at("n_scenarios").get<int>();
    corpus.config.n_test = cj.at("n_test").get<int>();
    corpus.config.rate_dps = cj.at("rate_dps").get<double>();
    corpus.config.duration_s = cj.at("duration_s").get<double>();
    corpus.config.fs_hz = cj.at("fs_hz").get<double>();
    corpus.config.scale_range = {cj.at("scale_range")[0].get<double>(),
                                 cj.at("scale_range")[1].get<double>()};
    corpus.config.bias_range = {cj.at("bias_range")[0].get<double>(),
                                cj.at("bias_range")[1].get<double>()};
    corpus.config.noise_sigma = cj.at("noise_sigma").get<double>();

    const auto base_dir = manifest_path.parent_path();
    for (const auto& entry : manifest.at("scenarios")) {
      corpus.scenarios.push_back(scenario_from_manifest_entry(entry, base_dir));
    }

    auto index_of = [&](const std::string& id) -> std::size_t {
      for (std::size_t i = 0; i < corpus.scenarios.size(); ++i) {
        if (corpus.scenarios[i].id == id) return i;
      }
      throw DataError("manifest references unknown scenario id " + id);
    };
    for (const auto& id : manifest.at("train_ids")) {
      corpus.train_indices.push_back(index_of(id.get<std::string>()));
    }
    for (const auto& id : manifest.at("test_ids")) {
      corpus.test_indices.push_back(index_of(id.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest " + manifest_path.string() + ": " + e.what());
  }
  return corpus;
}

std::vector<DataPoint> assemble_datapoints(const Corpus& corpus,
                                           const PipelineConfig& config) {
  std::vector<DataPoint> points;
  for (auto idx : corpus.train_indices) {
    const Scenario& scenario = corpus.scenarios[idx];
    for (const auto& segment :
         segment_scenario(scenario, config.segment_s, config.usable_s)) {
      auto windows = window_segment(segment, config.window_len, config.stride);
      points.insert(points.end(), std::make_move_iterator(windows.begin()),
                    std::make_move_iterator(windows.end()));
    }
  }
  return points;
}

nn::Dataset to_dataset(const std::vector<DataPoint>& points) {
  if (points.empty()) throw std::invalid_argument("to_dataset: no datapoints");
  const std::size_t w = points.front().window_len;
  nn::Dataset set;
  set.x = nn::Tensor::zeros({points.size(), 3, w});
  set.y = nn::Tensor::zeros({points.size(), 2});
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].window_len != w) {
      throw std::invalid_argument("to_dataset: inconsistent window lengths");
    }
    std::copy_n(points[i].window.data(), 3 * w, &set.x.values[i * 3 * w]);
    set.y.values[i * 2] = points[i].label.scale;
    set.y.values[i * 2 + 1] = points[i].label.bias;
  }
  return set;
}

void save_dataset(const DatasetSplit& split, const std::filesystem::path& bin_path,
                  const std::filesystem::path& index_path,
                  const std::string& config_hash) {
  if (split.train.empty() && split.val.empty()) {
    throw std::invalid_argument("save_dataset: empty split");
  }
  const std::size_t w =
      split.train.empty() ? split.val.front().window_len : split.train.front().window_len;

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot write dataset " + bin_path.string());
  write_points(bin, split.train);
  write_points(bin, split.val);
  if (!bin) throw DataError("dataset write failed: " + bin_path.string());

  nlohmann::json index;
  index["schema"] = kDatasetSchema;
  index["window_len"] = w;
  index["config_hash"] = config_hash;
  index["split_seed"] = split.split_seed;
  index["train"] = points_index(split.train);
  index["val"] = points_index(split.val);

  std::ofstream idx(index_path, std::ios::binary);
  if (!idx) throw DataError("cannot write dataset index " + index_path.string());
  idx << index.dump(2) << '\n';
  if (!idx) throw DataError("dataset index write failed: " + index_path.string());
}

DatasetSplit load_dataset(const std::filesystem::path& bin_path,
                          const std::filesystem::path& index_path) {
  std::ifstream idx_in(index_path);
  if (!idx_in) throw DataError("cannot open dataset index " + index_path.string());
  nlohmann::json index;
  try {
    idx_in >> index;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset index parse error: " + std::string(e.what()));
  }
  if (index.value("schema", "") != kDatasetSchema) {
    throw DataError("unexpected dataset schema in " + index_path.string());
  }

  const auto w = index.at("window_len").get<std::size_t>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot open dataset " + bin_path.string());

  auto read_points = [&](const nlohmann::json& entries) {
    std::vector<DataPoint> points;
    points.reserve(entries.size());
    for (const auto& e : entries) {
      DataPoint p;
      p.window_len = w;
      p.window.resize(3 * w);
      double label[2];
      bin.read(reinterpret_cast<char*>(p.window.data()),
               static_cast<std::streamsize>(3 * w * sizeof(double)));
      bin.read(reinterpret_cast<char*>(label), sizeof(label));
      if (!bin) throw DataError("dataset file truncated: " + bin_path.string());
      p.label = {label[0], label[1]};
      p.scenario_id = e.at("scenario_id").get<std::string>();
      p.segment_index = e.at("segment").get<std::size_t>();
      p.window_index = e.at("window").get<std::size_t>();
      points.push_back(std::move(p));
    }
    return points;
  };

  DatasetSplit split;
  split.split_seed = index.at("split_seed").get<std::uint64_t>();
  split.train = read_points(index.at("train"));
  split.val = read_points(index.at("val"));
  return split;
}

}  // namespace gyrocal
