#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bci/dataset.hpp"
#include "bci/types.hpp"

namespace bci {

// Window in seconds relative to movement onset (negative = before onset).
struct WindowSpec {
  double start_s = -1.5;
  double end_s = 0.0;
  bool operator==(const WindowSpec&) const = default;
};

struct Epoch {
  Matrix samples;  // [channels x window_length]
  std::string trial_id;
  WindowSpec window;
  double sampling_rate = 0.0;

  double duration_s() const { return static_cast<double>(samples.cols()) / sampling_rate; }
};

struct FrequencyBand {
  double low_hz = 0.0;
  double high_hz = 0.0;
  bool operator==(const FrequencyBand&) const = default;
};

inline constexpr FrequencyBand kMuBand{8.0, 12.0};
inline constexpr FrequencyBand kBetaBand{16.0, 24.0};
inline constexpr FrequencyBand kGammaBand{75.0, 100.0};

struct BandPowerSeries {
  Matrix values;  // [channels x frames], microvolts^2
  double frame_hop_s = 0.0;
  FrequencyBand band;
};

// Half-open sample range [begin, end).
struct SampleRange {
  std::ptrdiff_t begin = 0;
  std::ptrdiff_t end = 0;
};

SampleRange resolve_window(std::size_t onset_index, const WindowSpec& window, double sampling_rate);

void validate_band(const FrequencyBand& band, double sampling_rate);

Epoch extract_window(const Trial& trial, const WindowSpec& window, double sampling_rate);

// Epoch over absolute trial time [begin_s, end_s) measured from trial start.
Epoch extract_absolute(const Trial& trial, double begin_s, double end_s, double sampling_rate);

// Frames of frame_s seconds every hop_s seconds (rectangular). Each frame is
// band limited by zeroing DFT bins outside [low_hz, high_hz] and inverse
// transforming; the frame power is the mean square of the result. Frames that
// would overrun the epoch are dropped.
BandPowerSeries band_power(const Epoch& epoch, const FrequencyBand& band, double frame_s,
                           double hop_s);

// Per-channel mean over frames [first_frame, last_frame).
std::vector<double> reference_power(const BandPowerSeries& series, std::size_t first_frame,
                                    std::size_t last_frame);

}  // namespace bci
