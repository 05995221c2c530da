// ecog-bci command line: synth | train | eval | agree | simulate | serve

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "bci/io.hpp"
#include "bci/pipeline.hpp"
#include "bci/service.hpp"

namespace fs = std::filesystem;
using namespace bci;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string classifier;
  std::optional<double> snr;
  std::string out_dir = "out";
  std::string bind = "127.0.0.1:7070";
  std::optional<double> tick_hz;
  std::string dataset;
  std::string model;
  std::string static_dir;
};

// Config file first, then flag overrides.
PipelineConfig resolve(const Flags& f) {
  PipelineConfig c;
  if (!f.config.empty()) apply_config(c, read_config_file(f.config));
  if (f.seed) c.seed = *f.seed;
  if (!f.classifier.empty()) c.classifier = classifier_from_string(f.classifier);
  if (f.snr) c.synth.snr = *f.snr;
  if (f.tick_hz) c.control.tick_hz = *f.tick_hz;
  if (!f.dataset.empty()) c.dataset_path = f.dataset;
  c.validate();
  return c;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::pair<Dataset, Dataset> split_data(const PipelineConfig& c) {
  const auto ds = stage("data", [&] { return acquire_dataset(c); });
  return stage("split", [&] { return split_half(ds, c.seed); });
}

int cmd_synth(const Flags& f) {
  const auto c = stage("config", [&] { return resolve(f); });
  SynthConfig synth = c.synth;
  synth.seed = c.seed;
  const auto ds = stage("synth", [&] { return synthesize_dataset(synth); });
  stage("output", [&] { save_dataset(ds, f.out_dir); });
  std::cout << "wrote " << ds.trials.size() << " trials to " << f.out_dir << "\n";
  return 0;
}

int cmd_train(const Flags& f) {
  const auto c = stage("config", [&] { return resolve(f); });
  const auto [train, test] = split_data(c);
  const auto trained = train_pair(c, train);
  stage("output", [&] {
    fs::create_directories(f.out_dir);
    save_model(trained.model_pre, trained.spec_pre, fs::path(f.out_dir) / "model.json");
    save_model(trained.model_exec, trained.spec_exec, fs::path(f.out_dir) / "model_exec.json");
  });
  std::cout << "trained on " << train.trials.size() << " trials; models in " << f.out_dir << "\n";
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto c = stage("config", [&] { return resolve(f); });
  const fs::path model_path = f.model.empty() ? fs::path(f.out_dir) / "model.json" : fs::path(f.model);
  const auto [model, spec] = stage("model", [&] { return load_model(model_path); });
  const auto [train, test] = split_data(c);
  const auto report = stage("evaluate", [&] { return evaluate(model, spec, test); });
  stage("output", [&] {
    fs::create_directories(f.out_dir);
    write_file(fs::path(f.out_dir) / "evaluation.json", to_json(report).dump(2) + "\n");
  });
  std::cout << render_confusion(report);
  return 0;
}

int cmd_agree(const Flags& f) {
  const auto c = stage("config", [&] { return resolve(f); });
  const auto [pre, spec_pre] = stage("model", [&] { return load_model(fs::path(f.out_dir) / "model.json"); });
  const auto [exec, spec_exec] =
      stage("model", [&] { return load_model(fs::path(f.out_dir) / "model_exec.json"); });
  const auto [train, test] = split_data(c);
  const auto report =
      stage("agree", [&] { return two_instance_agreement(pre, exec, spec_pre, spec_exec, test); });
  stage("output", [&] { write_file(fs::path(f.out_dir) / "agreement.json", to_json(report).dump(2) + "\n"); });
  std::cout << "agreement_rate=" << report.agreement_rate << " over " << report.pairs.size() << " trials\n";
  return 0;
}

int cmd_simulate(const Flags& f) {
  const auto c = stage("config", [&] { return resolve(f); });
  const auto result = run_end_to_end(c, fs::path(f.out_dir));
  std::cout << render_confusion(result.evaluation);
  std::cout << "agreement_rate=" << result.agreement.agreement_rate << "\n";
  std::cout << "commands=" << result.commands.size()
            << " heading_changes=" << count_heading_changes(result.commands) << "\n";
  if (!result.frames.empty()) {
    const auto& last = result.frames.back();
    std::cout << "car at (" << last.x_m << ", " << last.y_m << ") heading " << to_string(last.compass) << "\n";
  }
  return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const Flags& f) {
  auto c = stage("config", [&] { return resolve(f); });
  Model model;
  FeatureSpec spec;
  if (!f.model.empty()) {
    std::tie(model, spec) = stage("model", [&] { return load_model(f.model); });
  } else {
    const auto [train, test] = split_data(c);
    const auto trained = train_pair(c, train);
    model = trained.model_pre;
    spec = trained.spec_pre;
  }
  ServiceOptions opts;
  const auto colon = f.bind.rfind(':');
  if (colon == std::string::npos) throw StageError("config", "--bind expects host:port");
  opts.host = f.bind.substr(0, colon);
  opts.stream_port = static_cast<std::uint16_t>(std::stoi(f.bind.substr(colon + 1)));
  opts.http_port = opts.stream_port == 0 ? 0 : static_cast<std::uint16_t>(opts.stream_port + 1);
  if (!f.static_dir.empty()) opts.static_dir = f.static_dir;
  Service service(c, model, spec, opts);
  service.start();
  std::cout << "stream on " << opts.host << ":" << service.stream_port() << ", http on " << opts.host << ":"
            << service.http_port() << std::endl;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECoG movement-intention BCI: classification pipeline and single-switch car control"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "TOML-style config file");
    sub->add_option("--seed", flags.seed, "random seed (synthesis and split)");
    sub->add_option("--classifier", flags.classifier, "nn or nfl")->check(CLI::IsMember({"nn", "nfl"}));
    sub->add_option("--snr", flags.snr, "class-separation gain for synthetic data");
    sub->add_option("--out-dir", flags.out_dir, "output directory");
    sub->add_option("--dataset", flags.dataset, "load this dataset directory instead of synthesizing");
  };

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset directory");
  common(synth);
  auto* train = app.add_subcommand("train", "train pre-onset and execution models");
  common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a model on the held-out half");
  common(eval);
  eval->add_option("--model", flags.model, "model JSON (default <out-dir>/model.json)");
  auto* agree = app.add_subcommand("agree", "two-instance agreement of the trained models");
  common(agree);
  auto* simulate = app.add_subcommand("simulate", "run the full two-stage pipeline");
  common(simulate);
  simulate->add_option("--tick-hz", flags.tick_hz, "control tick rate");
  auto* serve = app.add_subcommand("serve", "run the telemetry/steering service");
  common(serve);
  serve->add_option("--bind", flags.bind, "stream endpoint host:port (HTTP on port+1)");
  serve->add_option("--tick-hz", flags.tick_hz, "control tick rate");
  serve->add_option("--model", flags.model, "serve this model instead of training one");
  serve->add_option("--static-dir", flags.static_dir, "directory served over HTTP at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(flags);
    if (*train) return cmd_train(flags);
    if (*eval) return cmd_eval(flags);
    if (*agree) return cmd_agree(flags);
    if (*simulate) return cmd_simulate(flags);
    if (*serve) return cmd_serve(flags);
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage() << "] " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [unknown] " << e.what() << "\n";
    return 1;
  }
  return 2;
}
