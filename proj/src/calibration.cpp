#include "gyrocal/calibration.hpp"

#include <cmath>
#include <span>
#include <stdexcept>

#include "gyrocal/errors.hpp"
#include "gyrocal/numeric.hpp"

namespace gyrocal {

const char* method_name(Method m) {
  return m == Method::Baseline ? "Baseline" : "Learned";
}

nlohmann::json to_json(const CalibrationResult& result) {
  return {{"method", method_name(result.method)},
          {"window_s", result.window_s},
          {"scale", result.scale},
          {"bias", result.bias}};
}

double mean_window(const Recording& rec, double t_start, double t_end) {
  if (!(t_start >= 0.0) || !(t_start < t_end) ||
      t_end > rec.duration_s() + 1e-9) {
    throw std::invalid_argument("mean_window: require 0 <= t_start < t_end <= duration");
  }
  const double fs = rec.sample_rate_hz;
  auto i0 = static_cast<std::size_t>(std::ceil(t_start * fs));
  auto i1 = static_cast<std::size_t>(std::floor(t_end * fs));
  if (i1 > rec.samples.size()) i1 = rec.samples.size();
  if (i0 >= i1) {
    throw std::invalid_argument("mean_window: empty index range");
  }
  return kahan_mean(std::span<const double>(rec.samples).subspan(i0, i1 - i0));
}

CalibrationResult calibrate_single_axis(double mean_up, double mean_down,
                                        double rate_dps, double window_s) {
  if (!(rate_dps > 0.0)) {
    throw std::invalid_argument("calibrate_single_axis: rate_dps must be > 0");
  }
  CalibrationResult result;
  result.bias = (mean_up + mean_down) / 2.0;
  result.scale = ((mean_up - mean_down) - 2.0 * rate_dps) / (2.0 * rate_dps);
  result.window_s = window_s;
  result.method = Method::Baseline;
  return result;
}

Eigen::Matrix<double, 3, 4> calibrate_six_position(const SixPositionInput& input) {
  const auto& G = input.gt_matrix;
  if ((G.row(3).array() != 1.0).any()) {
    throw std::invalid_argument("six-position gt_matrix bottom row must be all ones");
  }
  // Z * G = M  <=>  G^T * Z^T = M^T; a rank-revealing QR solve is equivalent
  // to the normal-equation pseudo-inverse but numerically stable.
  Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 6, 4>> qr(G.transpose());
  if (qr.rank() < 4) {
    throw NumericError("six-position solve: gt_matrix is rank deficient");
  }
  Eigen::Matrix<double, 6, 3> rhs = input.averaged_measured.transpose();
  Eigen::Matrix<double, 4, 3> zt = qr.solve(rhs);
  return zt.transpose();
}

std::vector<AePoint> baseline_ae_curve(const Scenario& scenario, ScaleBias gt,
                                       const std::vector<double>& t_grid) {
  std::vector<AePoint> curve;
  curve.reserve(t_grid.size());
  for (double t : t_grid) {
    double mu_up = mean_window(scenario.up, 0.0, t);
    double mu_down = mean_window(scenario.down, 0.0, t);
    CalibrationResult est =
        calibrate_single_axis(mu_up, mu_down, scenario.rate_dps(), t);
    curve.push_back({t, std::abs(est.scale - gt.scale), std::abs(est.bias - gt.bias)});
  }
  return curve;
}

std::vector<double> seconds_grid(int t_max) {
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(t_max));
  for (int t = 1; t <= t_max; ++t) grid.push_back(static_cast<double>(t));
  return grid;
}

}  // namespace gyrocal
