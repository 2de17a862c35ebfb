#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gyrocal/errors.hpp"
#include "gyrocal/numeric.hpp"
#include "gyrocal/rng.hpp"
#include "gyrocal/sensor_model.hpp"

using namespace gyrocal;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "gyrocal_sensor_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(ApplyErrorModel, IdentityWithZeroTerms) {
  std::vector<double> input(100, 78.0);
  auto out = apply_error_model(input, {0.0, 0.0, 0.0}, 1);
  for (double v : out) EXPECT_EQ(v, 78.0);
}

TEST(ApplyErrorModel, ScaleAndBiasMatchHandValues) {
  std::vector<double> input(10, 78.0);
  GyroErrorTerms ts1{0.00388, -0.03073, 0.0};
  auto out = apply_error_model(input, ts1, 1);
  const double expected = (1.0 + 0.00388) * 78.0 + (-0.03073);
  for (double v : out) {
    EXPECT_EQ(v, expected);
    EXPECT_NEAR(v, 78.27191, 1e-9);
  }
}

TEST(ApplyErrorModel, DownOrientationKeepsBiasAdditive) {
  std::vector<double> input(5, -78.0);
  auto out = apply_error_model(input, {0.0, 0.5, 0.0}, 1);
  for (double v : out) EXPECT_NEAR(v, -77.5, 1e-12);
}

TEST(ApplyErrorModel, RejectsNonFiniteInput) {
  std::vector<double> input = {1.0, std::nan(""), 2.0};
  EXPECT_THROW(apply_error_model(input, {0, 0, 0}, 1), std::invalid_argument);
  EXPECT_THROW(apply_error_model({}, {0, 0, 0}, 1), std::invalid_argument);
}

TEST(ApplyErrorModel, RejectsBadTerms) {
  std::vector<double> input(3, 1.0);
  EXPECT_THROW(apply_error_model(input, {0.0, 0.0, -0.1}, 1), std::invalid_argument);
  EXPECT_THROW(apply_error_model(input, {-1.0, 0.0, 0.0}, 1), std::invalid_argument);
}

TEST(ApplyErrorModel, SeedDeterminism) {
  std::vector<double> input(1000, 78.0);
  GyroErrorTerms terms{0.004, -0.05, 0.03};
  auto a = apply_error_model(input, terms, 42);
  auto b = apply_error_model(input, terms, 42);
  auto c = apply_error_model(input, terms, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(ApplyErrorModel, LinearityWithoutNoise) {
  Rng rng(7);
  std::vector<double> x(200);
  for (auto& v : x) v = rng.uniform_in(-100.0, 100.0);
  std::vector<double> zeros(x.size(), 0.0);
  GyroErrorTerms terms{0.01, 0.3, 0.0};
  auto fx = apply_error_model(x, terms, 5);
  auto f0 = apply_error_model(zeros, terms, 5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(fx[i] - f0[i], (1.0 + terms.scale) * x[i], 1e-9);
  }
}

TEST(ApplyErrorModel, NoiseStandardDeviationWithinTwoPercent) {
  const double sigma = 0.0323;
  std::vector<double> input(200000, 78.0);
  GyroErrorTerms noisy{0.004, -0.05, sigma};
  GyroErrorTerms clean{0.004, -0.05, 0.0};
  auto out = apply_error_model(input, noisy, 99);
  auto base = apply_error_model(input, clean, 99);

  std::vector<double> noise(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) noise[i] = out[i] - base[i];
  const double mean = kahan_mean(noise);
  double sq = 0.0;
  for (double v : noise) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(noise.size() - 1));
  EXPECT_NEAR(sd, sigma, 0.02 * sigma);
}

TEST(GenerateScenario, SampleCountAndConstants) {
  Scenario s = generate_scenario(78.0, 70.0, 145.0, {0, 0, 0}, 3);
  EXPECT_EQ(s.up.samples.size(), 10150u);
  EXPECT_EQ(s.down.samples.size(), 10150u);
  EXPECT_EQ(s.up.orientation, Orientation::Up);
  EXPECT_EQ(s.down.orientation, Orientation::Down);
  EXPECT_EQ(s.up.true_rate_dps, s.down.true_rate_dps);
  EXPECT_EQ(s.up.sample_rate_hz, s.down.sample_rate_hz);
  EXPECT_NEAR(s.duration_s(), 70.0, 1e-12);
  for (double v : s.up.samples) EXPECT_EQ(v, 78.0);
  for (double v : s.down.samples) EXPECT_EQ(v, -78.0);
}

TEST(GenerateScenario, ErrorTermsEnterBothOrientations) {
  GyroErrorTerms ts2{0.00414, -0.07337, 0.0};
  Scenario s = generate_scenario(78.0, 1.0, 145.0, ts2, 3);
  const double up_expected = (1.0 + ts2.scale) * 78.0 + ts2.bias;
  const double down_expected = (1.0 + ts2.scale) * -78.0 + ts2.bias;
  for (double v : s.up.samples) EXPECT_EQ(v, up_expected);
  for (double v : s.down.samples) EXPECT_EQ(v, down_expected);
  ASSERT_TRUE(s.truth.has_value());
  EXPECT_EQ(s.truth->scale, ts2.scale);
  EXPECT_EQ(s.truth->bias, ts2.bias);
}

TEST(GenerateScenario, UpDownSymmetryWithoutNoise) {
  GyroErrorTerms terms{0.0042, -0.063, 0.0};
  Scenario s = generate_scenario(78.0, 2.0, 145.0, terms, 11);
  for (std::size_t i = 0; i < s.up.samples.size(); ++i) {
    EXPECT_NEAR(s.up.samples[i] + s.down.samples[i], 2.0 * terms.bias, 1e-12);
  }
}

TEST(GenerateScenario, IndependentNoiseStreams) {
  GyroErrorTerms terms{0.0, 0.0, 0.1};
  Scenario s = generate_scenario(78.0, 2.0, 145.0, terms, 11);
  // Up and down noise must differ; equal streams would make up + down constant.
  bool differs = false;
  for (std::size_t i = 0; i + 1 < s.up.samples.size() && !differs; ++i) {
    double a = s.up.samples[i] + s.down.samples[i];
    double b = s.up.samples[i + 1] + s.down.samples[i + 1];
    differs = std::abs(a - b) > 1e-12;
  }
  EXPECT_TRUE(differs);
}

TEST(GenerateScenario, ValidatesParameters) {
  EXPECT_THROW(generate_scenario(0.0, 70, 145, {0, 0, 0}, 1), std::invalid_argument);
  EXPECT_THROW(generate_scenario(78, 0.0, 145, {0, 0, 0}, 1), std::invalid_argument);
  EXPECT_THROW(generate_scenario(78, 70, 0.0, {0, 0, 0}, 1), std::invalid_argument);
}

TEST(SampleErrorTerms, WithinRanges) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto t = sample_error_terms(seed, {0.003, 0.005}, {-0.1, 0.0}, 0.01);
    EXPECT_GE(t.scale, 0.003);
    EXPECT_LT(t.scale, 0.005);
    EXPECT_GE(t.bias, -0.1);
    EXPECT_LT(t.bias, 0.0 + 1e-15);
    EXPECT_EQ(t.noise_sigma, 0.01);
  }
}

TEST(SampleErrorTerms, DegenerateRangesArePoints) {
  auto t = sample_error_terms(5, {0.004, 0.004}, {-0.05, -0.05}, 0.0);
  EXPECT_EQ(t.scale, 0.004);
  EXPECT_EQ(t.bias, -0.05);
}

TEST(SampleErrorTerms, DeterministicPerSeed) {
  auto a = sample_error_terms(123, {0.003, 0.005}, {-0.1, 0.0}, 0.02);
  auto b = sample_error_terms(123, {0.003, 0.005}, {-0.1, 0.0}, 0.02);
  EXPECT_EQ(a.scale, b.scale);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(SampleErrorTerms, RejectsInvertedRange) {
  EXPECT_THROW(sample_error_terms(1, {0.005, 0.003}, {-0.1, 0.0}, 0.0),
               std::invalid_argument);
  EXPECT_THROW(sample_error_terms(1, {0.003, 0.005}, {0.0, -0.1}, 0.0),
               std::invalid_argument);
}

TEST(DefaultNoiseSigma, MatchesDensityFoldedOverNyquist) {
  EXPECT_NEAR(default_noise_sigma(145.0), 3.8e-3 * std::sqrt(72.5), 1e-15);
  EXPECT_NEAR(default_noise_sigma(145.0), 0.0323, 1e-3);
}

TEST(RecordingCsv, RoundTripPreservesNineSignificantDigits) {
  Scenario s = generate_scenario(78.0, 2.0, 145.0, {0.004, -0.05, 0.03}, 17);
  const auto path = temp_dir() / "roundtrip.csv";
  write_recording_csv(s.up, path);
  Recording back = read_recording_csv(path, Orientation::Up, 78.0);

  ASSERT_EQ(back.samples.size(), s.up.samples.size());
  EXPECT_EQ(back.sample_rate_hz, 145.0);  // snapped to the integer rate
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    EXPECT_NEAR(back.samples[i], s.up.samples[i], 1e-6);
  }

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t_s,omega_z_dps");
}

TEST(RecordingCsv, MalformedRowNamesLine) {
  const auto path = temp_dir() / "malformed.csv";
  {
    std::ofstream out(path);
    out << "t_s,omega_z_dps\n0,78.0\n0.0068,not_a_number\n";
  }
  try {
    read_recording_csv(path, Orientation::Up, 78.0);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(RecordingCsv, WrongHeaderRejected) {
  const auto path = temp_dir() / "badheader.csv";
  {
    std::ofstream out(path);
    out << "time,omega\n0,78.0\n";
  }
  EXPECT_THROW(read_recording_csv(path, Orientation::Up, 78.0), DataError);
}

TEST(ScenarioManifest, EntryShapeAndRoundTrip) {
  Scenario s = generate_scenario(78.0, 1.0, 145.0, {0.004, -0.05, 0.02}, 23);
  s.id = "scn_007";
  s.labels = ScaleBias{0.00401, -0.0493};

  auto dir = temp_dir();
  write_recording_csv(s.up, dir / "scn_007_up.csv");
  write_recording_csv(s.down, dir / "scn_007_down.csv");
  auto entry = scenario_manifest_entry(s, "scn_007_up.csv", "scn_007_down.csv");

  const std::vector<std::string> keys = {"id",      "rate_dps", "fs_hz", "up_file",
                                         "down_file", "truth",    "labels"};
  EXPECT_EQ(entry.size(), keys.size());
  for (const auto& k : keys) EXPECT_TRUE(entry.contains(k)) << k;

  Scenario back = scenario_from_manifest_entry(entry, dir);
  EXPECT_EQ(back.id, "scn_007");
  EXPECT_EQ(back.rate_dps(), 78.0);
  ASSERT_TRUE(back.truth.has_value());
  EXPECT_EQ(back.truth->scale, 0.004);
  ASSERT_TRUE(back.labels.has_value());
  EXPECT_EQ(back.labels->scale, 0.00401);
  EXPECT_EQ(back.labels->bias, -0.0493);
}

TEST(ScenarioManifest, NullTruthAndLabels) {
  Scenario s = generate_scenario(78.0, 1.0, 145.0, {0, 0, 0}, 2);
  s.id = "scn_x";
  s.truth.reset();
  auto entry = scenario_manifest_entry(s, "u.csv", "d.csv");
  EXPECT_TRUE(entry["truth"].is_null());
  EXPECT_TRUE(entry["labels"].is_null());
}
