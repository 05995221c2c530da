#include "bci/preprocess.hpp"

#include <cmath>
#include <sstream>

#include "bci/kernels.hpp"

namespace bci {

SampleRange resolve_window(std::size_t onset_index, const WindowSpec& window, double sampling_rate) {
  const auto onset = static_cast<std::ptrdiff_t>(onset_index);
  return {onset + static_cast<std::ptrdiff_t>(std::lround(window.start_s * sampling_rate)),
          onset + static_cast<std::ptrdiff_t>(std::lround(window.end_s * sampling_rate))};
}

void validate_band(const FrequencyBand& band, double sampling_rate) {
  if (!(band.low_hz >= 0.0 && band.low_hz < band.high_hz && band.high_hz <= sampling_rate / 2.0)) {
    std::ostringstream os;
    os << "invalid band " << band.low_hz << "-" << band.high_hz << " Hz for sampling rate "
       << sampling_rate << " Hz";
    throw InvalidInput(os.str());
  }
}

namespace {

Epoch copy_range(const Trial& trial, SampleRange range, const WindowSpec& window,
                 double sampling_rate) {
  const auto length = static_cast<std::ptrdiff_t>(trial.length());
  auto fail = [&](const std::string& what) {
    std::ostringstream os;
    os << "trial " << trial.trial_id << ": window [" << window.start_s << ", " << window.end_s
       << ") resolves to samples [" << range.begin << ", " << range.end << ") " << what;
    throw InvalidInput(os.str());
  };
  if (range.begin < 0) fail("starts before sample 0");
  if (range.end > length) fail("ends after sample " + std::to_string(length));
  if (range.end <= range.begin) fail("is empty");

  const auto n = static_cast<std::size_t>(range.end - range.begin);
  Epoch epoch;
  epoch.samples = Matrix(trial.channels(), n);
  epoch.trial_id = trial.trial_id;
  epoch.window = window;
  epoch.sampling_rate = sampling_rate;
  for (std::size_t c = 0; c < trial.channels(); ++c) {
    auto src = trial.samples.row(c).subspan(static_cast<std::size_t>(range.begin), n);
    std::copy(src.begin(), src.end(), epoch.samples.row(c).begin());
  }
  return epoch;
}

}  // namespace

Epoch extract_window(const Trial& trial, const WindowSpec& window, double sampling_rate) {
  if (!(window.start_s < window.end_s))
    throw InvalidInput("trial " + trial.trial_id + ": window start must precede end");
  return copy_range(trial, resolve_window(trial.onset_index, window, sampling_rate), window,
                    sampling_rate);
}

Epoch extract_absolute(const Trial& trial, double begin_s, double end_s, double sampling_rate) {
  if (!(begin_s < end_s))
    throw InvalidInput("trial " + trial.trial_id + ": interval start must precede end");
  SampleRange range{static_cast<std::ptrdiff_t>(std::lround(begin_s * sampling_rate)),
                    static_cast<std::ptrdiff_t>(std::lround(end_s * sampling_rate))};
  const double onset_s = static_cast<double>(trial.onset_index) / sampling_rate;
  return copy_range(trial, range, {begin_s - onset_s, end_s - onset_s}, sampling_rate);
}

BandPowerSeries band_power(const Epoch& epoch, const FrequencyBand& band, double frame_s,
                           double hop_s) {
  validate_band(band, epoch.sampling_rate);
  const auto frame = static_cast<std::size_t>(std::lround(frame_s * epoch.sampling_rate));
  const auto hop = static_cast<std::size_t>(std::lround(hop_s * epoch.sampling_rate));
  if (frame == 0 || hop == 0) throw InvalidInput("frame and hop must cover at least one sample");
  if (frame > epoch.samples.cols()) {
    std::ostringstream os;
    os << "epoch " << epoch.trial_id << ": frame of " << frame << " samples exceeds epoch length "
       << epoch.samples.cols();
    throw InvalidInput(os.str());
  }
  const auto bins = kernels::band_bins(frame, epoch.sampling_rate, band.low_hz, band.high_hz);
  BandPowerSeries out;
  out.values = kernels::band_power_rows(epoch.samples, frame, hop, bins);
  out.frame_hop_s = static_cast<double>(hop) / epoch.sampling_rate;
  out.band = band;
  return out;
}

std::vector<double> reference_power(const BandPowerSeries& series, std::size_t first_frame,
                                    std::size_t last_frame) {
  if (first_frame >= last_frame || last_frame > series.values.cols()) {
    std::ostringstream os;
    os << "reference frames [" << first_frame << ", " << last_frame << ") invalid for "
       << series.values.cols() << " frames";
    throw InvalidInput(os.str());
  }
  std::vector<double> out(series.values.rows(), 0.0);
  for (std::size_t c = 0; c < series.values.rows(); ++c) {
    double acc = 0.0;
    for (std::size_t f = first_frame; f < last_frame; ++f) acc += series.values(c, f);
    out[c] = acc / static_cast<double>(last_frame - first_frame);
  }
  return out;
}

}  // namespace bci
