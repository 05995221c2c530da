#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bci/types.hpp"

namespace bci {

struct Trial {
  MovementClass label = MovementClass::RTR;
  Matrix samples;  // [channels x time], microvolts
  std::size_t onset_index = 0;
  std::string trial_id;

  std::size_t channels() const { return samples.rows(); }
  std::size_t length() const { return samples.cols(); }
  bool operator==(const Trial&) const = default;
};

struct Dataset {
  double sampling_rate = 0.0;
  std::vector<std::string> channel_names;
  std::vector<Trial> trials;

  std::size_t count(MovementClass c) const;
  bool operator==(const Dataset&) const = default;
};

// Throws InvalidInput naming the offending trial.
void validate_trial(const Trial& trial);
// Shape and finiteness checks only; the label is not inspected.
void validate_signal(const Trial& trial);
void validate_dataset(const Dataset& ds);

struct SynthConfig {
  std::map<MovementClass, std::size_t> counts{
      {MovementClass::RTR, 25}, {MovementClass::RTL, 23}, {MovementClass::WF, 27}};
  std::size_t channels = 8;
  double sampling_rate = 600.0;
  double trial_duration_s = 6.0;
  double onset_time_s = 3.0;
  // Gain applied to every class-specific signature (ERD depth and ERP ramp).
  double snr = 3.0;
  // erd_depth[class][channel]: fractional band-amplitude change inside the
  // ERD envelope before snr scaling. Empty -> default channel subsets.
  std::map<MovementClass, std::vector<double>> erd_depth;
  // ERP ramp peak (microvolts) before snr scaling.
  double erp_amplitude = 4.0;
  double noise_exponent = 1.0;
  double noise_rms = 4.0;
  double mu_amplitude = 8.0;
  double beta_amplitude = 4.0;
  std::uint64_t seed = 42;

  // Default class layout: each class suppresses mu/beta on its own channel
  // pair and carries an ERP ramp on that pair with a class-specific sign.
  static std::vector<double> default_erd_depth(MovementClass c, std::size_t channels);
  std::vector<double> depth_for(MovementClass c) const;
  double erp_polarity(MovementClass c, std::size_t channel) const;
  void validate() const;
};

Dataset synthesize_dataset(const SynthConfig& config);

// Per-class stratified half split; odd counts put the extra trial in train.
std::pair<Dataset, Dataset> split_half(const Dataset& ds, std::uint64_t seed);

// n trials drawn uniformly with replacement. Resampled ids are
// "<source_id>#bs<k>".
std::vector<Trial> bootstrap_resample(const std::vector<Trial>& trials, std::size_t n,
                                      std::uint64_t seed);

// Directory format: manifest.json + one headerless CSV per trial
// (rows = time samples, columns = channels).
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace bci
