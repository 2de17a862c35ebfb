#include "gyrocal/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "gyrocal/errors.hpp"

namespace gyrocal {

namespace {

constexpr const char* kReportSchema = "gyrocal.report.v1";

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

TermMetrics make_term_metrics(double ae_ours, double ae_baseline,
                              const std::vector<std::pair<int, double>>& curve,
                              double window_s) {
  TermMetrics m;
  m.ae_ours = ae_ours;
  m.ae_baseline = ae_baseline;
  if (ae_baseline > 0.0) m.improvement_pct = improvement_pct(ae_baseline, ae_ours);
  m.t_conv_s = t_conv(curve, ae_ours);
  if (m.t_conv_s) {
    m.conv_time_improvement_pct =
        conv_time_improvement(static_cast<double>(*m.t_conv_s), window_s);
  }
  return m;
}

nlohmann::json term_to_json(const TermMetrics& m) {
  nlohmann::json j;
  j["ae_ours"] = m.ae_ours;
  j["ae_baseline"] = m.ae_baseline;
  j["improvement_pct"] =
      m.improvement_pct ? nlohmann::json(*m.improvement_pct) : nlohmann::json();
  j["t_conv_s"] = m.t_conv_s ? nlohmann::json(*m.t_conv_s) : nlohmann::json();
  j["conv_time_improvement_pct"] = m.conv_time_improvement_pct
                                       ? nlohmann::json(*m.conv_time_improvement_pct)
                                       : nlohmann::json();
  return j;
}

}  // namespace

double absolute_error(double estimate, double gt) {
  if (!std::isfinite(estimate) || !std::isfinite(gt)) {
    throw std::invalid_argument("absolute_error: non-finite input");
  }
  return std::abs(estimate - gt);
}

double improvement_pct(double ae_baseline, double ae_ours) {
  if (!(ae_baseline > 0.0)) {
    throw std::invalid_argument("improvement_pct: ae_baseline must be > 0");
  }
  return 100.0 * (ae_baseline - ae_ours) / ae_baseline;
}

std::optional<int> t_conv(const std::vector<std::pair<int, double>>& baseline_curve,
                          double ae_ours) {
  if (baseline_curve.empty()) {
    throw std::invalid_argument("t_conv: empty baseline curve");
  }
  for (const auto& [t, ae] : baseline_curve) {
    if (ae <= ae_ours) return t;
  }
  return std::nullopt;
}

double conv_time_improvement(double t_conv_s, double window_s) {
  if (!(t_conv_s > 0.0)) {
    throw std::invalid_argument("conv_time_improvement: t_conv must be > 0");
  }
  if (t_conv_s < window_s) return 0.0;
  return 100.0 * (t_conv_s - window_s) / t_conv_s;
}

ScaleBias learned_estimate(nn::Model& model, const Scenario& scenario,
                           double window_s, const PipelineConfig& config) {
  const std::size_t w = model.config.window_len;
  const double fs = scenario.fs_hz();
  const auto limit = static_cast<std::size_t>(std::floor(window_s * fs));
  if (limit < w || scenario.up.samples.size() < limit) {
    throw std::invalid_argument("learned_estimate: window too short for the model");
  }

  std::vector<std::size_t> offsets;
  for (std::size_t off = 0; off + w <= limit; off += config.stride) {
    offsets.push_back(off);
  }

  nn::Tensor batch = nn::Tensor::zeros({offsets.size(), 3, w});
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    double* dst = &batch.values[k * 3 * w];
    const std::size_t off = offsets[k];
    std::copy_n(scenario.up.samples.begin() + off, w, dst);
    std::copy_n(scenario.down.samples.begin() + off, w, dst + w);
    std::fill_n(dst + 2 * w, w, scenario.rate_dps());
  }

  nn::Mode saved = model.mode;
  model.eval();
  nn::Tensor pred = nn::model_forward(model, batch);
  model.mode = saved;

  ScaleBias estimate{0.0, 0.0};
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    estimate.scale += pred.values[k * 2];
    estimate.bias += pred.values[k * 2 + 1];
  }
  const auto n = static_cast<double>(offsets.size());
  estimate.scale /= n;
  estimate.bias /= n;
  return estimate;
}

EvalReport evaluate(nn::Model& model, const std::vector<const Scenario*>& test_scenarios,
                    const PipelineConfig& config, const std::vector<double>& windows_s,
                    const std::string& config_hash) {
  if (test_scenarios.empty()) {
    throw std::invalid_argument("evaluate: no test scenarios");
  }
  double max_window = 0.0;
  for (double w : windows_s) max_window = std::max(max_window, w);

  EvalReport report;
  report.config_hash = config_hash;
  for (const Scenario* scenario : test_scenarios) {
    if (!scenario->labels) {
      throw std::invalid_argument("evaluate: test scenario " + scenario->id +
                                  " has no label");
    }
    if (scenario->duration_s() < max_window) {
      throw std::invalid_argument("evaluate: scenario shorter than largest window");
    }
    const ScaleBias label = *scenario->labels;

    ScenarioReport sr;
    sr.id = scenario->id;
    sr.label = label;
    sr.baseline_curve = baseline_ae_curve(*scenario, label, seconds_grid(70));

    std::vector<std::pair<int, double>> scale_curve, bias_curve;
    for (const auto& p : sr.baseline_curve) {
      scale_curve.emplace_back(static_cast<int>(p.t_s), p.ae_scale);
      bias_curve.emplace_back(static_cast<int>(p.t_s), p.ae_bias);
    }

    for (double window : windows_s) {
      ScaleBias ours = learned_estimate(model, *scenario, window, config);
      double mu_up = mean_window(scenario->up, 0.0, window);
      double mu_down = mean_window(scenario->down, 0.0, window);
      CalibrationResult base =
          calibrate_single_axis(mu_up, mu_down, scenario->rate_dps(), window);

      WindowReport wr;
      wr.window_s = window;
      wr.scale = make_term_metrics(absolute_error(ours.scale, label.scale),
                                   absolute_error(base.scale, label.scale),
                                   scale_curve, window);
      wr.bias = make_term_metrics(absolute_error(ours.bias, label.bias),
                                  absolute_error(base.bias, label.bias),
                                  bias_curve, window);
      sr.windows.push_back(wr);
    }
    report.scenarios.push_back(std::move(sr));
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["config_hash"] = report.config_hash;
  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& sr : report.scenarios) {
    nlohmann::json sj;
    sj["id"] = sr.id;
    sj["label"] = {{"scale", sr.label.scale}, {"bias", sr.label.bias}};
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& wr : sr.windows) {
      windows.push_back({{"window_s", wr.window_s},
                         {"scale", term_to_json(wr.scale)},
                         {"bias", term_to_json(wr.bias)}});
    }
    sj["windows"] = std::move(windows);
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : sr.baseline_curve) {
      curve.push_back({{"t_s", p.t_s}, {"ae_scale", p.ae_scale}, {"ae_bias", p.ae_bias}});
    }
    sj["baseline_curve"] = std::move(curve);
    scenarios.push_back(std::move(sj));
  }
  j["scenarios"] = std::move(scenarios);
  return j;
}

void write_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create directory " + out_dir.string());

  {
    std::ofstream out(out_dir / "report.json", std::ios::binary);
    if (!out) throw DataError("cannot write report.json");
    out << report_to_json(report).dump(2) << '\n';
  }

  {
    std::ofstream out(out_dir / "ae_table.csv", std::ios::binary);
    if (!out) throw DataError("cannot write ae_table.csv");
    out << "# config_hash=" << report.config_hash << '\n';
    out << "scenario,window_s,scale_ae_ours,scale_ae_baseline,scale_improv_pct,"
           "bias_ae_ours,bias_ae_baseline,bias_improv_pct\n";
    for (const auto& sr : report.scenarios) {
      for (const auto& wr : sr.windows) {
        out << sr.id << ',' << fmt_g(wr.window_s) << ',' << fmt_g(wr.scale.ae_ours)
            << ',' << fmt_g(wr.scale.ae_baseline) << ','
            << (wr.scale.improvement_pct ? fmt_g(*wr.scale.improvement_pct) : "")
            << ',' << fmt_g(wr.bias.ae_ours) << ',' << fmt_g(wr.bias.ae_baseline)
            << ',' << (wr.bias.improvement_pct ? fmt_g(*wr.bias.improvement_pct) : "")
            << '\n';
      }
    }
  }

  {
    std::ofstream out(out_dir / "ae_curves.csv", std::ios::binary);
    if (!out) throw DataError("cannot write ae_curves.csv");
    out << "# config_hash=" << report.config_hash << '\n';
    out << "scenario,term,t_s,ae_baseline,ae_ours\n";
    for (const auto& sr : report.scenarios) {
      auto marker = [&](const char* term, double t) -> std::string {
        for (const auto& wr : sr.windows) {
          if (wr.window_s == t) {
            const TermMetrics& m =
                std::string(term) == "scale" ? wr.scale : wr.bias;
            return fmt_g(m.ae_ours);
          }
        }
        return "";
      };
      for (const char* term : {"scale", "bias"}) {
        for (const auto& p : sr.baseline_curve) {
          const double ae = std::string(term) == "scale" ? p.ae_scale : p.ae_bias;
          out << sr.id << ',' << term << ',' << fmt_g(p.t_s) << ',' << fmt_g(ae)
              << ',' << marker(term, p.t_s) << '\n';
        }
      }
    }
  }
}

}  // namespace gyrocal
