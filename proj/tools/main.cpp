#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gyrocal/calibration.hpp"
#include "gyrocal/config.hpp"
#include "gyrocal/errors.hpp"
#include "gyrocal/eval.hpp"
#include "gyrocal/nn/model.hpp"
#include "gyrocal/nn/train.hpp"
#include "gyrocal/pipeline.hpp"
#include "gyrocal/sensor_model.hpp"

namespace {

namespace fs = std::filesystem;
using namespace gyrocal;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
  std::string config_path;
};

RunConfig resolve_config(const CommonOpts& opts) {
  if (!opts.config_path.empty()) return load_run_config(opts.config_path);
  return RunConfig{};
}

int cmd_simulate(const RunConfig& config, const std::string& out_dir) {
  Corpus corpus = generate_corpus(config.corpus, config.seeds.corpus);
  const auto manifest = write_corpus(corpus, out_dir, config_hash(config));
  std::cout << "wrote " << corpus.scenarios.size() << " scenarios ("
            << corpus.train_indices.size() << " train, " << corpus.test_indices.size()
            << " test) to " << manifest.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& config, const std::string& corpus_manifest,
              const std::string& out_model, const std::string& out_history,
              const std::string& dataset_out) {
  Corpus corpus = load_corpus(corpus_manifest);
  auto points = assemble_datapoints(corpus, config.pipeline);
  DatasetSplit split =
      split_train_val(std::move(points), config.pipeline.split_ratio, config.seeds.split);

  if (!dataset_out.empty()) {
    const fs::path base(dataset_out);
    save_dataset(split, base, fs::path(dataset_out).replace_extension(".index.json"),
                 config_hash(config));
  }

  nn::Dataset train_set = to_dataset(split.train);
  nn::Dataset val_set = to_dataset(split.val);

  nn::Model model = nn::make_model(config.model);
  nn::TrainHyper hyper = config.training;
  hyper.seed = config.seeds.training;
  nn::TrainResult result = nn::train(model, train_set, val_set, hyper);

  save_checkpoint(model, out_model, hyper.seed, config_hash(config));

  std::ofstream hist(out_history, std::ios::binary);
  if (!hist) throw DataError("cannot write history " + out_history);
  hist << "# config_hash=" << config_hash(config) << '\n';
  hist << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : result.history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g\n", e.epoch, e.train_loss,
                  e.val_loss);
    hist << buf;
  }

  std::cout << "trained " << result.history.size() << " epochs, best epoch "
            << result.best_epoch << " (val loss " << result.best_val_loss
            << "); checkpoint " << out_model << "\n";
  return kExitOk;
}

int cmd_calibrate(const std::string& up_path, const std::string& down_path,
                  double rate_dps, double window_s, const std::string& method,
                  const std::string& checkpoint_path) {
  Recording up = read_recording_csv(up_path, Orientation::Up, rate_dps);
  Recording down = read_recording_csv(down_path, Orientation::Down, rate_dps);

  CalibrationResult result;
  if (method == "baseline") {
    double mu_up = mean_window(up, 0.0, window_s);
    double mu_down = mean_window(down, 0.0, window_s);
    result = calibrate_single_axis(mu_up, mu_down, rate_dps, window_s);
  } else {
    nn::Model model = nn::load_checkpoint(checkpoint_path);
    Scenario scenario;
    scenario.id = "cli";
    scenario.up = std::move(up);
    scenario.down = std::move(down);
    PipelineConfig pipeline;
    ScaleBias est = learned_estimate(model, scenario, window_s, pipeline);
    result.scale = est.scale;
    result.bias = est.bias;
    result.window_s = window_s;
    result.method = Method::Learned;
  }
  std::cout << to_json(result).dump() << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, const std::string& checkpoint_path,
                 const std::string& corpus_manifest, const std::string& out_dir) {
  nn::Model model = nn::load_checkpoint(checkpoint_path);
  Corpus corpus = load_corpus(corpus_manifest);
  if (corpus.test_indices.empty()) {
    throw DataError("corpus has no held-out test scenarios");
  }
  std::vector<const Scenario*> tests;
  for (auto i : corpus.test_indices) tests.push_back(&corpus.scenarios[i]);

  EvalReport report =
      evaluate(model, tests, config.pipeline, {2.0, 4.0, 6.0}, config_hash(config));
  write_report(report, out_dir);
  std::cout << "wrote report for " << tests.size() << " test scenarios to " << out_dir
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gyroscope z-axis calibration toolkit: turntable-recording "
               "simulator, six-position baseline, learned calibrator, evaluation"};
  app.require_subcommand(1);

  CommonOpts common;

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic recording corpus");
  std::string sim_out;
  std::optional<int> sim_scenarios, sim_test;
  std::optional<std::uint64_t> sim_seed;
  std::optional<double> sim_sigma, sim_rate, sim_duration, sim_fs;
  sim->add_option("--config", common.config_path, "run config JSON");
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--scenarios", sim_scenarios, "number of scenarios");
  sim->add_option("--test", sim_test, "number of held-out test scenarios");
  sim->add_option("--seed", sim_seed, "corpus seed");
  sim->add_option("--noise-sigma", sim_sigma, "per-sample noise sigma (DPS)");
  sim->add_option("--rate", sim_rate, "turntable rate (DPS)");
  sim->add_option("--duration", sim_duration, "scenario duration (s)");
  sim->add_option("--fs", sim_fs, "sample rate (Hz)");

  // train
  auto* trn = app.add_subcommand("train", "train the learned calibrator on a corpus");
  std::string trn_corpus, trn_model = "checkpoint.json", trn_history = "history.csv";
  std::string trn_dataset_out;
  std::optional<std::size_t> trn_epochs, trn_batch, trn_patience;
  std::optional<double> trn_lr;
  std::optional<std::uint64_t> trn_seed, trn_split_seed;
  trn->add_option("--config", common.config_path, "run config JSON");
  trn->add_option("--corpus", trn_corpus, "corpus manifest JSON")->required();
  trn->add_option("--out-model", trn_model, "checkpoint output path");
  trn->add_option("--out-history", trn_history, "per-epoch loss CSV path");
  trn->add_option("--dataset-out", trn_dataset_out,
                  "also dump the assembled dataset (binary + index sidecar)");
  trn->add_option("--epochs", trn_epochs, "max training epochs");
  trn->add_option("--batch", trn_batch, "batch size");
  trn->add_option("--patience", trn_patience, "early-stop patience (epochs)");
  trn->add_option("--lr", trn_lr, "learning rate");
  trn->add_option("--seed", trn_seed, "training seed");
  trn->add_option("--split-seed", trn_split_seed, "train/val split seed");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "calibrate one up/down recording pair");
  std::string cal_up, cal_down, cal_method = "baseline", cal_checkpoint;
  double cal_rate = 78.0, cal_window = 2.0;
  cal->add_option("--up", cal_up, "up-orientation recording CSV")->required();
  cal->add_option("--down", cal_down, "down-orientation recording CSV")->required();
  cal->add_option("--rate", cal_rate, "turntable rate (DPS)");
  cal->add_option("--window", cal_window, "calibration window (s)");
  cal->add_option("--method", cal_method, "baseline | learned")
      ->check(CLI::IsMember({"baseline", "learned"}));
  cal->add_option("--checkpoint", cal_checkpoint, "model checkpoint (learned only)");

  // evaluate
  auto* evl = app.add_subcommand("evaluate", "run the accuracy/convergence protocol");
  std::string evl_checkpoint, evl_corpus, evl_out;
  evl->add_option("--config", common.config_path, "run config JSON");
  evl->add_option("--checkpoint", evl_checkpoint, "model checkpoint")->required();
  evl->add_option("--corpus", evl_corpus, "corpus manifest JSON")->required();
  evl->add_option("--out", evl_out, "report output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      RunConfig config = resolve_config(common);
      if (sim_scenarios) config.corpus.n_scenarios = *sim_scenarios;
      if (sim_test) config.corpus.n_test = *sim_test;
      if (sim_seed) config.seeds.corpus = *sim_seed;
      if (sim_sigma) config.corpus.noise_sigma = *sim_sigma;
      if (sim_rate) config.corpus.rate_dps = *sim_rate;
      if (sim_duration) config.corpus.duration_s = *sim_duration;
      if (sim_fs) config.corpus.fs_hz = *sim_fs;
      return cmd_simulate(config, sim_out);
    }
    if (trn->parsed()) {
      RunConfig config = resolve_config(common);
      if (trn_epochs) config.training.max_epochs = *trn_epochs;
      if (trn_batch) config.training.batch_size = *trn_batch;
      if (trn_patience) config.training.patience = *trn_patience;
      if (trn_lr) config.training.lr = *trn_lr;
      if (trn_seed) config.seeds.training = *trn_seed;
      if (trn_split_seed) config.seeds.split = *trn_split_seed;
      return cmd_train(config, trn_corpus, trn_model, trn_history, trn_dataset_out);
    }
    if (cal->parsed()) {
      if (cal_method == "learned" && cal_checkpoint.empty()) {
        std::cerr << "error: --method learned requires --checkpoint\n";
        return kExitUsage;
      }
      return cmd_calibrate(cal_up, cal_down, cal_rate, cal_window, cal_method,
                           cal_checkpoint);
    }
    if (evl->parsed()) {
      RunConfig config = resolve_config(common);
      return cmd_evaluate(config, evl_checkpoint, evl_corpus, evl_out);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
