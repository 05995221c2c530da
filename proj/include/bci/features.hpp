#pragma once

#include <cstdint>
#include <vector>

#include "bci/dataset.hpp"
#include "bci/preprocess.hpp"

namespace bci {

struct ErpWaveform {
  Matrix values;  // [channels x time], microvolts
  WindowSpec window;
  std::size_t n_trials_averaged = 0;
};

struct ErdErsCurve {
  Matrix percent;  // [channels x frames]
  FrequencyBand band;
  double frame_hop_s = 0.0;
};

struct FeatureSpec {
  double sampling_rate = 600.0;
  std::vector<FrequencyBand> bands{kMuBand, kBetaBand, kGammaBand};
  WindowSpec analysis_window{-1.5, 0.0};
  // Reference interval in absolute trial time.
  double reference_begin_s = 0.0;
  double reference_end_s = 1.0;
  std::size_t erp_downsample_factor = 90;
  double frame_s = 0.25;
  double hop_s = 0.125;
  // z-score parameters; empty until fit_feature_spec.
  std::vector<double> mean;
  std::vector<double> stddev;

  bool fitted() const { return !mean.empty(); }
  std::size_t window_length() const;
  std::size_t feature_length(std::size_t channels) const;
  void validate() const;
  // FNV-1a over the canonical byte image of every field.
  std::uint64_t fingerprint() const;
};

struct FeatureVector {
  std::vector<double> values;
  std::uint64_t fingerprint = 0;
};

ErpWaveform compute_erp_template(const std::vector<Trial>& trials, const WindowSpec& window,
                                 double sampling_rate);

// percent = 100 * (A - R) / R per channel and analysis frame.
ErdErsCurve compute_erd_ers(const Trial& trial, const FrequencyBand& band, const FeatureSpec& spec);

// Un-normalised features: per-channel/per-band mean ERD/ERS percent followed by
// the per-channel block-averaged ERP segment.
std::vector<double> raw_features(const Trial& trial, const FeatureSpec& spec);

FeatureSpec fit_feature_spec(const Dataset& train, const FeatureSpec& base);

FeatureVector extract_features(const Trial& trial, const FeatureSpec& spec);

// One feature row per trial. The serial variant is the reference for tests.
Matrix extract_features_batch_serial(const std::vector<Trial>& trials, const FeatureSpec& spec);
Matrix extract_features_batch(const std::vector<Trial>& trials, const FeatureSpec& spec);

}  // namespace bci
