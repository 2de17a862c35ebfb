#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace gyrocal {

/// A (scale factor, bias) pair. Used both for ground-truth labels and for
/// calibration estimates; scale is a dimensionless fraction, bias is in DPS.
struct ScaleBias {
  double scale = 0.0;
  double bias = 0.0;
};

enum class Orientation { Up, Down };

/// Ground-truth deterministic error terms of one simulated z-axis gyro.
/// scale is a fraction (0.00388 means 0.388%), bias in DPS, noise_sigma the
/// per-sample standard deviation of the additive white Gaussian noise.
struct GyroErrorTerms {
  double scale = 0.0;
  double bias = 0.0;
  double noise_sigma = 0.0;
};

/// Uniformly sampled angular-velocity time series with orientation tag.
struct Recording {
  std::vector<double> samples;  // DPS
  double sample_rate_hz = 0.0;
  Orientation orientation = Orientation::Up;
  double true_rate_dps = 0.0;  // turntable magnitude, positive

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Paired up/down recordings at one turntable rate. `truth` is present for
/// synthetic data; `labels` holds the (scale, bias) pair assigned by the
/// labeling procedure.
struct Scenario {
  std::string id;
  Recording up;
  Recording down;
  std::optional<GyroErrorTerms> truth;
  std::optional<ScaleBias> labels;

  double rate_dps() const { return up.true_rate_dps; }
  double fs_hz() const { return up.sample_rate_hz; }
  double duration_s() const { return up.duration_s(); }
};

void validate_terms(const GyroErrorTerms& terms);

/// Default per-sample noise level: 3.8 mDPS/sqrt(Hz) noise density folded
/// over the Nyquist bandwidth fs/2 (about 0.0323 DPS at 145 Hz).
double default_noise_sigma(double fs_hz);

/// Applies the reduced gyroscope error model to a known true-rate signal:
/// out[i] = (1 + scale) * in[i] + bias + n_i with n_i ~ N(0, noise_sigma^2)
/// drawn from the stream seeded by rng_seed. Identical (input, terms, seed)
/// triples produce bit-identical output. Rejects non-finite inputs.
std::vector<double> apply_error_model(const std::vector<double>& true_rate_dps,
                                      const GyroErrorTerms& terms,
                                      std::uint64_t rng_seed);

/// Simulates one turntable scenario: the up recording senses +rate_dps, the
/// down recording -rate_dps (flipping negates the sensed rate while the bias
/// stays additive). The two noise streams are derived independently from
/// rng_seed; `truth` carries the terms used.
Scenario generate_scenario(double rate_dps, double duration_s, double fs_hz,
                           const GyroErrorTerms& terms, std::uint64_t rng_seed);

/// Draws error terms uniformly within the given closed ranges,
/// deterministically per seed. Throws on inverted or non-finite ranges.
GyroErrorTerms sample_error_terms(std::uint64_t rng_seed,
                                  std::pair<double, double> scale_range,
                                  std::pair<double, double> bias_range,
                                  double noise_sigma);

// --- on-disk formats ---

/// CSV with header `t_s,omega_z_dps`, one row per sample, 9 significant digits.
void write_recording_csv(const Recording& rec, const std::filesystem::path& path);

/// Reads a recording CSV. The sample rate is inferred from the time column
/// (snapped to an integer when within 1e-3 Hz). Malformed rows raise
/// DataError naming the offending line.
Recording read_recording_csv(const std::filesystem::path& path,
                             Orientation orientation, double true_rate_dps);

/// Scenario manifest entry:
/// {id, rate_dps, fs_hz, up_file, down_file, truth|null, labels|null}.
nlohmann::json scenario_manifest_entry(const Scenario& scenario,
                                       const std::string& up_file,
                                       const std::string& down_file);

/// Rebuilds a Scenario from a manifest entry, reading its CSVs from base_dir.
Scenario scenario_from_manifest_entry(const nlohmann::json& entry,
                                      const std::filesystem::path& base_dir);

}  // namespace gyrocal
