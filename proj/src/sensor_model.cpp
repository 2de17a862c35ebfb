#include "gyrocal/sensor_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gyrocal/errors.hpp"
#include "gyrocal/rng.hpp"

namespace gyrocal {

namespace {

constexpr std::uint64_t kUpStream = 0;
constexpr std::uint64_t kDownStream = 1;

void append_g9(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out += buf;
}

}  // namespace

void validate_terms(const GyroErrorTerms& terms) {
  if (!std::isfinite(terms.scale) || !std::isfinite(terms.bias) ||
      !std::isfinite(terms.noise_sigma)) {
    throw std::invalid_argument("error terms must be finite");
  }
  if (terms.noise_sigma < 0.0) {
    throw std::invalid_argument("noise_sigma must be >= 0");
  }
  if (terms.scale <= -1.0) {
    throw std::invalid_argument("scale must be > -1 (effective gain 1+s positive)");
  }
}

double default_noise_sigma(double fs_hz) {
  return 3.8e-3 * std::sqrt(fs_hz / 2.0);
}

std::vector<double> apply_error_model(const std::vector<double>& true_rate_dps,
                                      const GyroErrorTerms& terms,
                                      std::uint64_t rng_seed) {
  if (true_rate_dps.empty()) {
    throw std::invalid_argument("apply_error_model: empty input sequence");
  }
  validate_terms(terms);

  const double gain = 1.0 + terms.scale;
  std::vector<double> out(true_rate_dps.size());
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < true_rate_dps.size(); ++i) {
    double x = true_rate_dps[i];
    if (!std::isfinite(x)) {
      throw std::invalid_argument("apply_error_model: non-finite input at index " +
                                  std::to_string(i));
    }
    double noise = terms.noise_sigma > 0.0 ? terms.noise_sigma * rng.normal() : 0.0;
    out[i] = gain * x + terms.bias + noise;
  }
  return out;
}

Scenario generate_scenario(double rate_dps, double duration_s, double fs_hz,
                           const GyroErrorTerms& terms, std::uint64_t rng_seed) {
  if (!(rate_dps > 0.0)) throw std::invalid_argument("rate_dps must be > 0");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration_s must be > 0");
  if (!(fs_hz > 0.0)) throw std::invalid_argument("fs_hz must be > 0");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs_hz));
  if (n == 0) throw std::invalid_argument("scenario would contain zero samples");

  Scenario scenario;
  scenario.truth = terms;

  std::vector<double> truth_signal(n, rate_dps);
  scenario.up.samples =
      apply_error_model(truth_signal, terms, derive_seed(rng_seed, kUpStream));
  scenario.up.sample_rate_hz = fs_hz;
  scenario.up.orientation = Orientation::Up;
  scenario.up.true_rate_dps = rate_dps;

  for (auto& v : truth_signal) v = -rate_dps;
  scenario.down.samples =
      apply_error_model(truth_signal, terms, derive_seed(rng_seed, kDownStream));
  scenario.down.sample_rate_hz = fs_hz;
  scenario.down.orientation = Orientation::Down;
  scenario.down.true_rate_dps = rate_dps;

  return scenario;
}

GyroErrorTerms sample_error_terms(std::uint64_t rng_seed,
                                  std::pair<double, double> scale_range,
                                  std::pair<double, double> bias_range,
                                  double noise_sigma) {
  auto check_range = [](std::pair<double, double> r, const char* name) {
    if (!std::isfinite(r.first) || !std::isfinite(r.second) || r.first > r.second) {
      throw std::invalid_argument(std::string("invalid ") + name + " range");
    }
  };
  check_range(scale_range, "scale");
  check_range(bias_range, "bias");

  Rng rng(rng_seed);
  GyroErrorTerms terms;
  terms.scale = rng.uniform_in(scale_range.first, scale_range.second);
  terms.bias = rng.uniform_in(bias_range.first, bias_range.second);
  terms.noise_sigma = noise_sigma;
  validate_terms(terms);
  return terms;
}

void write_recording_csv(const Recording& rec, const std::filesystem::path& path) {
  std::string body = "t_s,omega_z_dps\n";
  body.reserve(rec.samples.size() * 24 + body.size());
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    append_g9(body, static_cast<double>(i) / rec.sample_rate_hz);
    body += ',';
    append_g9(body, rec.samples[i]);
    body += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << body;
  if (!out) throw DataError("write failed: " + path.string());
}

Recording read_recording_csv(const std::filesystem::path& path,
                             Orientation orientation, double true_rate_dps) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open recording: " + path.string());

  std::string line;
  if (!std::getline(in, line) || line != "t_s,omega_z_dps") {
    throw DataError(path.string() + ":1: expected header 't_s,omega_z_dps'");
  }

  Recording rec;
  rec.orientation = orientation;
  rec.true_rate_dps = true_rate_dps;
  double t_first = 0.0, t_last = 0.0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    double t = std::strtod(s, &end);
    if (end == s || *end != ',') {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed row '" + line + "'");
    }
    const char* vs = end + 1;
    double v = std::strtod(vs, &end);
    if (end == vs || *end != '\0') {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed row '" + line + "'");
    }
    if (rec.samples.empty()) t_first = t;
    t_last = t;
    rec.samples.push_back(v);
  }
  if (rec.samples.size() < 2) {
    throw DataError(path.string() + ": fewer than two samples");
  }

  double fs = static_cast<double>(rec.samples.size() - 1) / (t_last - t_first);
  double snapped = std::round(fs);
  rec.sample_rate_hz = std::abs(fs - snapped) < 1e-3 ? snapped : fs;
  return rec;
}

nlohmann::json scenario_manifest_entry(const Scenario& scenario,
                                       const std::string& up_file,
                                       const std::string& down_file) {
  nlohmann::json entry;
  entry["id"] = scenario.id;
  entry["rate_dps"] = scenario.rate_dps();
  entry["fs_hz"] = scenario.fs_hz();
  entry["up_file"] = up_file;
  entry["down_file"] = down_file;
  if (scenario.truth) {
    entry["truth"] = {{"scale", scenario.truth->scale},
                      {"bias", scenario.truth->bias},
                      {"sigma", scenario.truth->noise_sigma}};
  } else {
    entry["truth"] = nullptr;
  }
  if (scenario.labels) {
    entry["labels"] = {{"scale", scenario.labels->scale},
                       {"bias", scenario.labels->bias}};
  } else {
    entry["labels"] = nullptr;
  }
  return entry;
}

Scenario scenario_from_manifest_entry(const nlohmann::json& entry,
                                      const std::filesystem::path& base_dir) {
  Scenario scenario;
  try {
    scenario.id = entry.at("id").get<std::string>();
    double rate = entry.at("rate_dps").get<double>();
    scenario.up = read_recording_csv(base_dir / entry.at("up_file").get<std::string>(),
                                     Orientation::Up, rate);
    scenario.down = read_recording_csv(
        base_dir / entry.at("down_file").get<std::string>(), Orientation::Down, rate);
    if (!entry.at("truth").is_null()) {
      GyroErrorTerms t;
      t.scale = entry["truth"].at("scale").get<double>();
      t.bias = entry["truth"].at("bias").get<double>();
      t.noise_sigma = entry["truth"].at("sigma").get<double>();
      scenario.truth = t;
    }
    if (!entry.at("labels").is_null()) {
      ScaleBias l;
      l.scale = entry["labels"].at("scale").get<double>();
      l.bias = entry["labels"].at("bias").get<double>();
      scenario.labels = l;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad scenario manifest entry: ") + e.what());
  }
  return scenario;
}

}  // namespace gyrocal
