#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bci/classify.hpp"
#include "bci/dataset.hpp"
#include "bci/features.hpp"

namespace bci {

struct TrialOutcome {
  std::string trial_id;
  MovementClass truth = MovementClass::RTR;
  MovementClass predicted = MovementClass::OTHER;
  double distance = 0.0;
};

struct EvaluationReport {
  // confusion[predicted][true]; predicted includes OTHER (row 3).
  std::array<std::array<std::size_t, 3>, 4> confusion{};
  double failure_rate = 0.0;
  std::array<double, 3> per_class_accuracy{};
  std::size_t n_test = 0;
  std::vector<TrialOutcome> outcomes;

  std::size_t count_predicted(MovementClass c) const;
};

using TrialClassifier = std::function<Classification(const Trial&)>;

// A prediction counts as a failure whenever it differs from the true label,
// including OTHER.
EvaluationReport evaluate(const TrialClassifier& classifier, const Dataset& test);
EvaluationReport evaluate(const Model& model, const FeatureSpec& spec, const Dataset& test);

struct AgreementPair {
  std::string trial_id;
  MovementClass pre_onset = MovementClass::OTHER;
  MovementClass execution = MovementClass::OTHER;
};

struct AgreementReport {
  double agreement_rate = 0.0;
  std::vector<AgreementPair> pairs;
};

AgreementReport agreement(const TrialClassifier& pre, const TrialClassifier& exec,
                          const std::vector<Trial>& trials);
// spec_pre must end at or before onset; spec_exec must start at or after it.
AgreementReport two_instance_agreement(const Model& model_pre, const Model& model_exec,
                                       const FeatureSpec& spec_pre, const FeatureSpec& spec_exec,
                                       const Dataset& test);

struct ProbeOutcome {
  std::string trial_id;
  bool error_raised = false;
  // Error text; also set when a degenerate trial was rejected as OTHER.
  std::string error;
  MovementClass predicted = MovementClass::OTHER;
};

struct RobustnessReport {
  double rejection_rate = 0.0;  // OTHER / classified
  std::size_t errors_raised = 0;
  std::size_t classified = 0;
  std::size_t rejected = 0;
  std::vector<ProbeOutcome> outcomes;
};

// Never throws for bad trials: structural violations are recorded as raised
// errors and never classified.
RobustnessReport robustness_probe(const Model& model, const FeatureSpec& spec,
                                  const std::vector<Trial>& invalid_trials);

// Structurally valid trials carrying none of the trained signatures: 1/f
// background at the generator's amplitude with no rhythms, ERD or ERP.
std::vector<Trial> make_noise_trials(const SynthConfig& like, std::size_t n, std::uint64_t seed);

}  // namespace bci
