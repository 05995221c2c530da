#include "bci/validate.hpp"

#include <cmath>

namespace bci {

std::size_t EvaluationReport::count_predicted(MovementClass c) const {
  std::size_t n = 0;
  for (auto v : confusion[class_index(c)]) n += v;
  return n;
}

EvaluationReport evaluate(const TrialClassifier& classifier, const Dataset& test) {
  if (test.trials.empty()) throw InvalidInput("evaluate: empty test set");
  EvaluationReport report;
  report.n_test = test.trials.size();
  report.outcomes.resize(test.trials.size());
  for (std::size_t i = 0; i < test.trials.size(); ++i) {
    const auto& t = test.trials[i];
    const auto result = classifier(t);
    report.outcomes[i] = {t.trial_id, t.label, result.label, result.distance};
  }

  std::array<std::size_t, 3> per_class{};
  std::size_t correct = 0;
  for (const auto& o : report.outcomes) {
    ++report.confusion[class_index(o.predicted)][class_index(o.truth)];
    ++per_class[class_index(o.truth)];
    if (o.predicted == o.truth) ++correct;
  }
  for (std::size_t c = 0; c < 3; ++c)
    report.per_class_accuracy[c] =
        per_class[c] ? static_cast<double>(report.confusion[c][c]) / static_cast<double>(per_class[c]) : 0.0;
  report.failure_rate = 1.0 - static_cast<double>(correct) / static_cast<double>(report.n_test);
  return report;
}

namespace {

void check_fingerprint(const Model& model, const FeatureSpec& spec) {
  if (model_fingerprint(model) != spec.fingerprint())
    throw InvalidInput("model was trained with a different feature spec (fingerprint mismatch)");
}

}  // namespace

EvaluationReport evaluate(const Model& model, const FeatureSpec& spec, const Dataset& test) {
  check_fingerprint(model, spec);
  if (test.trials.empty()) throw InvalidInput("evaluate: empty test set");
  const Matrix features = extract_features_batch(test.trials, spec);
  std::size_t next = 0;
  // Trials are presented in dataset order, so row `next` belongs to the
  // trial being classified.
  return evaluate([&](const Trial&) { return classify(model, features.row(next++)); }, test);
}

AgreementReport agreement(const TrialClassifier& pre, const TrialClassifier& exec,
                          const std::vector<Trial>& trials) {
  AgreementReport report;
  std::size_t same = 0;
  for (const auto& t : trials) {
    AgreementPair p{t.trial_id, pre(t).label, exec(t).label};
    if (p.pre_onset == p.execution) ++same;
    report.pairs.push_back(std::move(p));
  }
  report.agreement_rate =
      trials.empty() ? 0.0 : static_cast<double>(same) / static_cast<double>(trials.size());
  return report;
}

AgreementReport two_instance_agreement(const Model& model_pre, const Model& model_exec,
                                       const FeatureSpec& spec_pre, const FeatureSpec& spec_exec,
                                       const Dataset& test) {
  if (spec_pre.analysis_window.end_s > 0.0)
    throw InvalidInput("pre-onset instance window must end at or before movement onset");
  if (spec_exec.analysis_window.start_s < 0.0)
    throw InvalidInput("execution instance window must start at or after movement onset");
  check_fingerprint(model_pre, spec_pre);
  check_fingerprint(model_exec, spec_exec);
  const Matrix pre = extract_features_batch(test.trials, spec_pre);
  const Matrix exec = extract_features_batch(test.trials, spec_exec);
  std::size_t i = 0, j = 0;
  return agreement([&](const Trial&) { return classify(model_pre, pre.row(i++)); },
                   [&](const Trial&) { return classify(model_exec, exec.row(j++)); }, test.trials);
}

RobustnessReport robustness_probe(const Model& model, const FeatureSpec& spec,
                                  const std::vector<Trial>& invalid_trials) {
  RobustnessReport report;
  for (const auto& t : invalid_trials) {
    ProbeOutcome o;
    o.trial_id = t.trial_id;
    try {
      validate_signal(t);
      const std::size_t expected = spec.feature_length(t.channels());
      if (expected != model_dimension(model))
        throw InvalidInput("trial " + t.trial_id + ": " + std::to_string(t.channels()) +
                           " channels do not match the model");
      try {
        o.predicted = classify(model, extract_features(t, spec).values).label;
      } catch (const InvalidInput& e) {
        // Structurally sound but degenerate (e.g. no reference power): reject.
        o.predicted = MovementClass::OTHER;
        o.error = e.what();
      }
      ++report.classified;
      if (o.predicted == MovementClass::OTHER) ++report.rejected;
    } catch (const std::exception& e) {
      o.error_raised = true;
      o.error = e.what();
      ++report.errors_raised;
    }
    report.outcomes.push_back(std::move(o));
  }
  report.rejection_rate = report.classified
                              ? static_cast<double>(report.rejected) / static_cast<double>(report.classified)
                              : 0.0;
  return report;
}

std::vector<Trial> make_noise_trials(const SynthConfig& like, std::size_t n, std::uint64_t seed) {
  SynthConfig cfg = like;
  cfg.counts = {{MovementClass::RTR, n}};
  cfg.snr = 0.0;
  cfg.noise_rms = std::sqrt(like.noise_rms * like.noise_rms +
                            0.5 * like.mu_amplitude * like.mu_amplitude +
                            0.5 * like.beta_amplitude * like.beta_amplitude);
  cfg.mu_amplitude = 0.0;
  cfg.beta_amplitude = 0.0;
  cfg.seed = seed;
  auto trials = synthesize_dataset(cfg).trials;
  for (std::size_t i = 0; i < trials.size(); ++i) trials[i].trial_id = "noise_" + std::to_string(i);
  return trials;
}

}  // namespace bci
