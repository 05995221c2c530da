#include "bci/pipeline.hpp"

#include <cctype>
#include <cmath>
#include <memory>
#include <fstream>
#include <sstream>

#include "bci/io.hpp"

namespace bci {

void PipelineConfig::validate() const {
  if (!dataset_path) synth.validate();
  if (!(rejection_percentile >= 0.0 && rejection_percentile <= 100.0))
    throw InvalidInput("rejection_percentile must be in [0, 100]");
  if (!(features.analysis_window.start_s < features.analysis_window.end_s))
    throw InvalidInput("analysis window start must precede end");
  if (!(execution_window.start_s < execution_window.end_s))
    throw InvalidInput("execution window start must precede end");
  if (!(control.tick_hz > 0.0)) throw InvalidInput("tick_hz must be > 0");
  if (port == PortKind::Tcp && port_target.find(':') == std::string::npos)
    throw InvalidInput("tcp port needs port_target = \"host:port\"");
}

ClassifierKind classifier_from_string(const std::string& s) {
  if (s == "nn") return ClassifierKind::Nn;
  if (s == "nfl") return ClassifierKind::Nfl;
  throw InvalidInput("classifier must be nn or nfl, got '" + s + "'");
}

PortKind port_from_string(const std::string& s) {
  if (s == "loopback") return PortKind::Loopback;
  if (s == "file") return PortKind::File;
  if (s == "tcp") return PortKind::Tcp;
  throw InvalidInput("port must be loopback, file or tcp, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Config file

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

double as_number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw InvalidInput("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

std::string as_string(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"')
    throw InvalidInput("config: " + key + " expects a quoted string");
  return v.substr(1, v.size() - 2);
}

std::vector<double> as_list(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw InvalidInput("config: " + key + " expects a [list]");
  std::vector<double> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(as_number(key, item));
  }
  return out;
}

WindowSpec as_window(const std::string& key, const std::string& v) {
  const auto l = as_list(key, v);
  if (l.size() != 2) throw InvalidInput("config: " + key + " expects [start, end]");
  return {l[0], l[1]};
}

std::size_t as_count(const std::string& key, const std::string& v) {
  const double d = as_number(key, v);
  if (d < 0.0 || d != std::floor(d)) throw InvalidInput("config: " + key + " expects a non-negative integer");
  return static_cast<std::size_t>(d);
}

}  // namespace

ConfigValues parse_config_text(const std::string& text) {
  ConfigValues out;
  std::string section;
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') throw InvalidInput("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InvalidInput("config line " + std::to_string(line_no) + ": empty key or value");
    const auto full = section.empty() ? key : section + "." + key;
    if (!out.emplace(full, value).second)
      throw InvalidInput("config line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
  }
  return out;
}

ConfigValues read_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidInput("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(PipelineConfig& c, const ConfigValues& values) {
  for (const auto& [key, v] : values) {
    if (key == "seed") c.seed = as_count(key, v);
    else if (key == "data.dataset") c.dataset_path = as_string(key, v);
    else if (key == "synth.rtr") c.synth.counts[MovementClass::RTR] = as_count(key, v);
    else if (key == "synth.rtl") c.synth.counts[MovementClass::RTL] = as_count(key, v);
    else if (key == "synth.wf") c.synth.counts[MovementClass::WF] = as_count(key, v);
    else if (key == "synth.channels") c.synth.channels = as_count(key, v);
    else if (key == "synth.sampling_rate_hz") c.synth.sampling_rate = as_number(key, v);
    else if (key == "synth.trial_duration_s") c.synth.trial_duration_s = as_number(key, v);
    else if (key == "synth.onset_time_s") c.synth.onset_time_s = as_number(key, v);
    else if (key == "synth.snr") c.synth.snr = as_number(key, v);
    else if (key == "synth.erp_amplitude") c.synth.erp_amplitude = as_number(key, v);
    else if (key == "synth.noise_exponent") c.synth.noise_exponent = as_number(key, v);
    else if (key == "synth.noise_rms") c.synth.noise_rms = as_number(key, v);
    else if (key == "synth.mu_amplitude") c.synth.mu_amplitude = as_number(key, v);
    else if (key == "synth.beta_amplitude") c.synth.beta_amplitude = as_number(key, v);
    else if (key == "features.analysis_window") c.features.analysis_window = as_window(key, v);
    else if (key == "features.execution_window") c.execution_window = as_window(key, v);
    else if (key == "features.reference_window") {
      const auto w = as_window(key, v);
      c.features.reference_begin_s = w.start_s;
      c.features.reference_end_s = w.end_s;
    } else if (key == "features.erp_downsample_factor") c.features.erp_downsample_factor = as_count(key, v);
    else if (key == "features.frame_s") c.features.frame_s = as_number(key, v);
    else if (key == "features.hop_s") c.features.hop_s = as_number(key, v);
    else if (key == "features.bands") {
      const auto l = as_list(key, v);
      if (l.empty() || l.size() % 2 != 0) throw InvalidInput("config: features.bands expects [low, high, ...]");
      c.features.bands.clear();
      for (std::size_t i = 0; i < l.size(); i += 2) c.features.bands.push_back({l[i], l[i + 1]});
    } else if (key == "classifier.kind") c.classifier = classifier_from_string(as_string(key, v));
    else if (key == "classifier.rejection_percentile") c.rejection_percentile = as_number(key, v);
    else if (key == "control.tick_hz") c.control.tick_hz = as_number(key, v);
    else if (key == "control.speed_mps") c.control.speed_mps = as_number(key, v);
    else if (key == "control.port") c.port = port_from_string(as_string(key, v));
    else if (key == "control.port_target") c.port_target = as_string(key, v);
    else throw InvalidInput("config: unknown key '" + key + "'");
  }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

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

std::vector<MovementClass> labels_of(const Dataset& ds) {
  std::vector<MovementClass> out;
  for (const auto& t : ds.trials) out.push_back(t.label);
  return out;
}

std::unique_ptr<DevicePort> open_port(const PipelineConfig& config,
                                      const std::optional<std::filesystem::path>& out_dir) {
  switch (config.port) {
    case PortKind::File:
      if (out_dir) return std::make_unique<FilePort>(*out_dir / "commands.ndjson", true);
      return std::make_unique<LoopbackPort>();
    case PortKind::Tcp: {
      const auto colon = config.port_target.rfind(':');
      return std::make_unique<TcpPort>(config.port_target.substr(0, colon),
                                       static_cast<std::uint16_t>(std::stoi(config.port_target.substr(colon + 1))));
    }
    case PortKind::Loopback: break;
  }
  return std::make_unique<LoopbackPort>();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

}  // namespace

Dataset acquire_dataset(const PipelineConfig& config) {
  if (config.dataset_path) return load_dataset(*config.dataset_path);
  SynthConfig synth = config.synth;
  synth.seed = config.seed;
  return synthesize_dataset(synth);
}

Model train_model(ClassifierKind kind, const FeatureSpec& spec, const Dataset& train,
                  double rejection_percentile) {
  const Matrix x = extract_features_batch(train.trials, spec);
  const auto y = labels_of(train);
  if (kind == ClassifierKind::Nfl) return train_nfl(x, y, rejection_percentile, spec.fingerprint());
  return train_nn(x, y, rejection_percentile, spec.fingerprint());
}

TrainedPair train_pair(const PipelineConfig& config, const Dataset& train) {
  FeatureSpec exec_base = config.features;
  exec_base.analysis_window = config.execution_window;
  TrainedPair out;
  out.spec_pre = stage("features", [&] { return fit_feature_spec(train, config.features); });
  out.spec_exec = stage("features", [&] { return fit_feature_spec(train, exec_base); });
  out.model_pre = stage("train", [&] {
    return train_model(config.classifier, out.spec_pre, train, config.rejection_percentile);
  });
  out.model_exec = stage("train", [&] {
    return train_model(config.classifier, out.spec_exec, train, config.rejection_percentile);
  });
  return out;
}

EndToEndResult run_end_to_end(const PipelineConfig& config,
                              const std::optional<std::filesystem::path>& out_dir) {
  stage("config", [&] { config.validate(); });
  if (out_dir) stage("output", [&] { std::filesystem::create_directories(*out_dir); });

  const Dataset ds = stage("data", [&] { return acquire_dataset(config); });
  const auto [train, test] = stage("split", [&] { return split_half(ds, config.seed); });
  const TrainedPair trained = train_pair(config, train);

  EndToEndResult result;
  result.evaluation = stage("evaluate", [&] { return evaluate(trained.model_pre, trained.spec_pre, test); });
  result.agreement = stage("agree", [&] {
    return two_instance_agreement(trained.model_pre, trained.model_exec, trained.spec_pre,
                                  trained.spec_exec, test);
  });

  stage("control", [&] {
    auto port = open_port(config, out_dir);
    ControlLoop loop(config.control, port.get());
    for (const auto& o : result.evaluation.outcomes) {
      loop.enqueue({ControlEvent::Kind::Code, encode_class(o.predicted)});
      result.frames.push_back(loop.tick());
    }
    result.commands = port->log();
    port->close();
  });

  if (out_dir) {
    stage("output", [&] {
      write_text(*out_dir / "evaluation.json", to_json(result.evaluation).dump(2) + "\n");
      write_text(*out_dir / "agreement.json", to_json(result.agreement).dump(2) + "\n");
      save_model(trained.model_pre, trained.spec_pre, *out_dir / "model.json");
    });
  }
  return result;
}

std::size_t count_heading_changes(const std::vector<LoggedCommand>& log) {
  std::size_t changes = 0;
  std::uint8_t prev = 0;
  for (const auto& c : log) {
    if (c.word.value != prev) ++changes;
    prev = c.word.value;
  }
  return changes;
}

}  // namespace bci
