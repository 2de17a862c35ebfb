#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gyrocal/calibration.hpp"
#include "gyrocal/nn/model.hpp"
#include "gyrocal/pipeline.hpp"
#include "gyrocal/sensor_model.hpp"

namespace gyrocal {

/// Accuracy and convergence-time results of one (term, calibration window)
/// cell: learned vs baseline absolute error, improvement percentage,
/// baseline convergence time and its improvement. T_conv is absent when the
/// baseline never reaches the learned error on the curve grid.
struct TermMetrics {
  double ae_ours = 0.0;
  double ae_baseline = 0.0;
  std::optional<double> improvement_pct;
  std::optional<int> t_conv_s;
  std::optional<double> conv_time_improvement_pct;
};

struct WindowReport {
  double window_s = 0.0;
  TermMetrics scale;
  TermMetrics bias;
};

struct ScenarioReport {
  std::string id;
  ScaleBias label;
  std::vector<WindowReport> windows;
  std::vector<AePoint> baseline_curve;  // 1..70 s grid
};

struct EvalReport {
  std::string config_hash;
  std::vector<ScenarioReport> scenarios;
};

/// |estimate - gt|.
double absolute_error(double estimate, double gt);

/// 100 * (ae_baseline - ae_ours) / ae_baseline. Throws when ae_baseline <= 0.
double improvement_pct(double ae_baseline, double ae_ours);

/// Smallest t on the curve with AE(t) <= ae_ours; empty when never reached.
std::optional<int> t_conv(const std::vector<std::pair<int, double>>& baseline_curve,
                          double ae_ours);

/// 100 * (t_conv - window_s) / t_conv, clamped to 0 when t_conv < window_s.
double conv_time_improvement(double t_conv_s, double window_s);

/// Learned estimate for a calibration window: the model consumes the
/// 2-second datapoints contained in [0, window_s) (stride per config) and
/// the per-window estimates are averaged.
ScaleBias learned_estimate(nn::Model& model, const Scenario& scenario,
                           double window_s, const PipelineConfig& config);

/// Full protocol over labeled test scenarios: per scenario and calibration
/// window, learned and baseline AEs against the label, improvements, and
/// convergence times from the 1..70 s baseline curve.
EvalReport evaluate(nn::Model& model, const std::vector<const Scenario*>& test_scenarios,
                    const PipelineConfig& config,
                    const std::vector<double>& windows_s = {2.0, 4.0, 6.0},
                    const std::string& config_hash = "");

nlohmann::json report_to_json(const EvalReport& report);

/// Writes report.json plus two CSVs: the per-window AE table and the
/// baseline-AE curve data with learned-AE markers at the calibration windows.
void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace gyrocal
