#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gyrocal/nn/train.hpp"
#include "gyrocal/sensor_model.hpp"

namespace gyrocal {

/// One 3 x W training window (rows: up, down, constant reference rate) with
/// its (scale, bias) label and provenance back to the source scenario.
struct DataPoint {
  std::vector<double> window;  // row-major 3 x window_len
  std::size_t window_len = 0;
  ScaleBias label;
  std::string scenario_id;
  std::size_t segment_index = 0;
  std::size_t window_index = 0;
};

struct DatasetSplit {
  std::vector<DataPoint> train;
  std::vector<DataPoint> val;
  std::uint64_t split_seed = 0;
};

/// One segment of a scenario: matching up/down sample slices plus the
/// metadata windowing needs.
struct SegmentPair {
  std::vector<double> up;
  std::vector<double> down;
  double fs_hz = 0.0;
  double rate_dps = 0.0;
  std::string scenario_id;
  std::size_t segment_index = 0;
  ScaleBias label;
};

struct PipelineConfig {
  double segment_s = 6.0;
  double usable_s = 48.0;
  std::size_t window_len = 290;
  std::size_t stride = 174;  // 60% of the window length
  double split_ratio = 0.8;
};

struct CorpusConfig {
  int n_scenarios = 48;
  int n_test = 2;
  double rate_dps = 78.0;
  double duration_s = 70.0;
  double fs_hz = 145.0;
  std::pair<double, double> scale_range{0.003, 0.005};
  std::pair<double, double> bias_range{-0.1, 0.0};
  double noise_sigma = default_noise_sigma(145.0);
};

/// Scenarios plus the train/test partition (test scenarios are the last
/// n_test generated).
struct Corpus {
  std::vector<Scenario> scenarios;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  CorpusConfig config;
  std::uint64_t seed = 0;
};

/// Runs the baseline calibration over the entire recordings and returns the
/// resulting (scale, bias) pair used as the scenario's ground-truth label.
ScaleBias label_scenario(const Scenario& scenario);

/// Cuts both recordings into consecutive non-overlapping segments covering
/// [0, usable_s); defaults give 8 six-second segments.
std::vector<SegmentPair> segment_scenario(const Scenario& scenario,
                                          double segment_s = 6.0,
                                          double usable_s = 48.0);

/// Slides a window of `window_len` samples with the given stride over a
/// segment; each window stacks the up row, down row and constant-rate row and
/// inherits the scenario label.
std::vector<DataPoint> window_segment(const SegmentPair& segment,
                                      std::size_t window_len = 290,
                                      std::size_t stride = 174);

/// Seeded shuffle followed by a floor(ratio * N) / remainder split.
DatasetSplit split_train_val(std::vector<DataPoint> points, double ratio,
                             std::uint64_t seed);

/// Samples per-scenario error terms, simulates, and labels n_scenarios
/// scenarios; the last n_test are flagged as held-out tests.
Corpus generate_corpus(const CorpusConfig& config, std::uint64_t seed);

/// Writes recording CSVs plus a versioned manifest; returns the manifest path.
std::filesystem::path write_corpus(const Corpus& corpus,
                                   const std::filesystem::path& out_dir,
                                   const std::string& config_hash);

Corpus load_corpus(const std::filesystem::path& manifest_path);

/// Label -> segment -> window over the corpus' train scenarios, in stable
/// (scenario, segment, window) order.
std::vector<DataPoint> assemble_datapoints(const Corpus& corpus,
                                           const PipelineConfig& config);

/// Packs datapoints into contiguous tensors for training.
nn::Dataset to_dataset(const std::vector<DataPoint>& points);

/// Flat little-endian binary tensor file plus a JSON index sidecar
/// (provenance, split assignment, seeds, schema version).
void save_dataset(const DatasetSplit& split, const std::filesystem::path& bin_path,
                  const std::filesystem::path& index_path,
                  const std::string& config_hash);
DatasetSplit load_dataset(const std::filesystem::path& bin_path,
                          const std::filesystem::path& index_path);

}  // namespace gyrocal
