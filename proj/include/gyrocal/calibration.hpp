#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <vector>

#include "gyrocal/sensor_model.hpp"

namespace gyrocal {

enum class Method { Baseline, Learned };

const char* method_name(Method m);

/// Estimated (scale, bias) with the calibration-window length that produced it.
struct CalibrationResult {
  double scale = 0.0;   // dimensionless fraction
  double bias = 0.0;    // DPS
  double window_s = 0.0;
  Method method = Method::Baseline;
};

/// {method, window_s, scale, bias}
nlohmann::json to_json(const CalibrationResult& result);

/// Inputs to the general six-position least-squares solve: per-position mean
/// measurements (columns x+, x-, y+, y-, z+, z-) and the true angular-velocity
/// matrix with a row of ones appended.
struct SixPositionInput {
  Eigen::Matrix<double, 3, 6> averaged_measured;
  Eigen::Matrix<double, 4, 6> gt_matrix;
};

/// Arithmetic mean of the samples with t_start <= t < t_end, i.e. index range
/// [ceil(t_start*fs), floor(t_end*fs)). Throws on an empty index range.
double mean_window(const Recording& rec, double t_start, double t_end);

/// Single-axis closed form from the up/down window means:
///   bias  = (mean_up + mean_down) / 2
///   scale = ((mean_up - mean_down) - 2*rate) / (2*rate)
/// The down mean is the raw sensor output (negative sensed rate, additive
/// positive-sign bias), not a sign-flipped value.
CalibrationResult calibrate_single_axis(double mean_up, double mean_down,
                                        double rate_dps, double window_s);

/// General least-squares solve Z = M * G^T * (G * G^T)^-1 computed through a
/// rank-revealing QR factorization. Per-axis scale is Z(i,i) - 1 and bias is
/// Z(i,3). Throws NumericError when G is rank deficient.
Eigen::Matrix<double, 3, 4> calibrate_six_position(const SixPositionInput& input);

struct AePoint {
  double t_s = 0.0;
  double ae_scale = 0.0;
  double ae_bias = 0.0;
};

/// Runs calibrate_single_axis on the means over [0, t) for each t in t_grid
/// and reports the absolute errors of both terms against gt.
std::vector<AePoint> baseline_ae_curve(const Scenario& scenario, ScaleBias gt,
                                       const std::vector<double>& t_grid);

/// 1, 2, ..., t_max seconds.
std::vector<double> seconds_grid(int t_max = 70);

}  // namespace gyrocal
