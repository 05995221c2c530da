#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bci/control.hpp"
#include "bci/dataset.hpp"
#include "bci/features.hpp"
#include "bci/validate.hpp"

namespace bci {

enum class ClassifierKind { Nn, Nfl };
enum class PortKind { Loopback, File, Tcp };

struct PipelineConfig {
  // Empty -> synthesize from `synth`.
  std::optional<std::filesystem::path> dataset_path;
  SynthConfig synth;
  FeatureSpec features;  // pre-onset instance
  WindowSpec execution_window{0.0, 1.5};
  ClassifierKind classifier = ClassifierKind::Nn;
  double rejection_percentile = 95.0;
  std::uint64_t seed = 42;
  ControlConfig control;
  PortKind port = PortKind::File;
  std::string port_target;  // host:port for tcp

  void validate() const;
};

// Flat TOML-style document: [section] headers and `key = value` lines where a
// value is a number, a "string", true/false or a [number, ...] list.
using ConfigValues = std::map<std::string, std::string>;
ConfigValues parse_config_text(const std::string& text);
ConfigValues read_config_file(const std::filesystem::path& file);
// Unknown keys are rejected.
void apply_config(PipelineConfig& config, const ConfigValues& values);

ClassifierKind classifier_from_string(const std::string& s);
PortKind port_from_string(const std::string& s);

// Carries the name of the pipeline stage that failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct TrainedPair {
  FeatureSpec spec_pre;
  FeatureSpec spec_exec;
  Model model_pre;
  Model model_exec;
};

Dataset acquire_dataset(const PipelineConfig& config);
TrainedPair train_pair(const PipelineConfig& config, const Dataset& train);
Model train_model(ClassifierKind kind, const FeatureSpec& spec, const Dataset& train,
                  double rejection_percentile);

struct EndToEndResult {
  EvaluationReport evaluation;
  AgreementReport agreement;
  std::vector<LoggedCommand> commands;
  std::vector<TelemetryFrame> frames;
};

// synthesize/load -> split -> fit -> train -> evaluate + agreement -> stream
// test predictions through the control chain. When out_dir is set writes
// evaluation.json, agreement.json, commands.ndjson and model.json there.
EndToEndResult run_end_to_end(const PipelineConfig& config,
                              const std::optional<std::filesystem::path>& out_dir);

// Number of rose-index changes along a command log, starting from north.
std::size_t count_heading_changes(const std::vector<LoggedCommand>& log);

}  // namespace bci
