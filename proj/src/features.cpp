#include "bci/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

namespace bci {

std::size_t FeatureSpec::window_length() const {
  return static_cast<std::size_t>(
      std::lround((analysis_window.end_s - analysis_window.start_s) * sampling_rate));
}

std::size_t FeatureSpec::feature_length(std::size_t channels) const {
  const std::size_t blocks = (window_length() + erp_downsample_factor - 1) / erp_downsample_factor;
  return channels * (bands.size() + blocks);
}

void FeatureSpec::validate() const {
  const auto fail = [](const std::string& what) { throw InvalidInput("feature spec: " + what); };
  if (!(sampling_rate > 0.0)) fail("sampling_rate must be > 0");
  if (!(analysis_window.start_s < analysis_window.end_s)) fail("analysis window start must precede end");
  if (!(reference_begin_s >= 0.0 && reference_begin_s < reference_end_s)) fail("invalid reference window");
  if (erp_downsample_factor < 1) fail("erp_downsample_factor must be >= 1");
  if (!(frame_s > 0.0 && hop_s > 0.0)) fail("frame and hop must be positive");
  for (const auto& b : bands) validate_band(b, sampling_rate);
  if (mean.size() != stddev.size()) fail("normalisation mean/std length mismatch");
  for (double s : stddev)
    if (!(s > 0.0)) fail("normalisation std must be > 0");
}

std::uint64_t FeatureSpec::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto feed_d = [&](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    feed(&bits, sizeof bits);
  };
  auto feed_n = [&](std::uint64_t v) { feed(&v, sizeof v); };
  feed_d(sampling_rate);
  feed_n(bands.size());
  for (const auto& b : bands) {
    feed_d(b.low_hz);
    feed_d(b.high_hz);
  }
  feed_d(analysis_window.start_s);
  feed_d(analysis_window.end_s);
  feed_d(reference_begin_s);
  feed_d(reference_end_s);
  feed_n(erp_downsample_factor);
  feed_d(frame_s);
  feed_d(hop_s);
  feed_n(mean.size());
  for (double v : mean) feed_d(v);
  for (double v : stddev) feed_d(v);
  return h;
}

ErpWaveform compute_erp_template(const std::vector<Trial>& trials, const WindowSpec& window,
                                 double sampling_rate) {
  if (trials.empty()) throw InvalidInput("ERP template needs at least one trial");
  ErpWaveform erp;
  erp.window = window;
  erp.n_trials_averaged = trials.size();
  for (const auto& t : trials) {
    if (t.channels() != trials.front().channels())
      throw InvalidInput("trial " + t.trial_id + ": channel count differs from " +
                         trials.front().trial_id);
    const auto epoch = extract_window(t, window, sampling_rate);
    if (erp.values.empty()) erp.values = Matrix(epoch.samples.rows(), epoch.samples.cols());
    auto& acc = erp.values.data();
    const auto& src = epoch.samples.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
  }
  const double inv = 1.0 / static_cast<double>(trials.size());
  for (auto& v : erp.values.data()) v *= inv;
  return erp;
}

ErdErsCurve compute_erd_ers(const Trial& trial, const FrequencyBand& band, const FeatureSpec& spec) {
  const double fs = spec.sampling_rate;
  const auto reference = extract_absolute(trial, spec.reference_begin_s, spec.reference_end_s, fs);
  const auto ref_series = band_power(reference, band, spec.frame_s, spec.hop_s);
  const auto ref = reference_power(ref_series, 0, ref_series.values.cols());

  const auto analysis = extract_window(trial, spec.analysis_window, fs);
  const auto series = band_power(analysis, band, spec.frame_s, spec.hop_s);

  ErdErsCurve curve;
  curve.band = band;
  curve.frame_hop_s = series.frame_hop_s;
  curve.percent = Matrix(series.values.rows(), series.values.cols());
  for (std::size_t c = 0; c < series.values.rows(); ++c) {
    if (!(ref[c] > 0.0)) {
      std::ostringstream os;
      os << "trial " << trial.trial_id << ": zero reference power on channel " << c << " in band "
         << band.low_hz << "-" << band.high_hz << " Hz";
      throw InvalidInput(os.str());
    }
    for (std::size_t f = 0; f < series.values.cols(); ++f)
      curve.percent(c, f) = 100.0 * (series.values(c, f) - ref[c]) / ref[c];
  }
  return curve;
}

std::vector<double> raw_features(const Trial& trial, const FeatureSpec& spec) {
  validate_signal(trial);
  const std::size_t channels = trial.channels();
  std::vector<double> out;
  out.reserve(spec.feature_length(channels));

  std::vector<ErdErsCurve> curves;
  curves.reserve(spec.bands.size());
  for (const auto& band : spec.bands) curves.push_back(compute_erd_ers(trial, band, spec));
  for (std::size_t c = 0; c < channels; ++c) {
    for (const auto& curve : curves) {
      double acc = 0.0;
      const auto row = curve.percent.row(c);
      for (double v : row) acc += v;
      out.push_back(acc / static_cast<double>(row.size()));
    }
  }

  const auto epoch = extract_window(trial, spec.analysis_window, spec.sampling_rate);
  const std::size_t factor = spec.erp_downsample_factor;
  for (std::size_t c = 0; c < channels; ++c) {
    const auto row = epoch.samples.row(c);
    for (std::size_t b = 0; b < row.size(); b += factor) {
      const std::size_t e = std::min(row.size(), b + factor);
      double acc = 0.0;
      for (std::size_t i = b; i < e; ++i) acc += row[i];
      out.push_back(acc / static_cast<double>(e - b));
    }
  }
  return out;
}

namespace {

void normalise(std::span<double> v, const FeatureSpec& spec) {
  if (!spec.fitted()) return;
  if (spec.mean.size() != v.size())
    throw InvalidInput("feature length " + std::to_string(v.size()) +
                       " does not match normalisation length " + std::to_string(spec.mean.size()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - spec.mean[i]) / spec.stddev[i];
}

}  // namespace

FeatureSpec fit_feature_spec(const Dataset& train, const FeatureSpec& base) {
  if (train.trials.empty()) throw InvalidInput("cannot fit feature normalisation on an empty training set");
  FeatureSpec spec = base;
  spec.sampling_rate = train.sampling_rate;
  spec.mean.clear();
  spec.stddev.clear();
  spec.validate();

  const Matrix raw = extract_features_batch(train.trials, spec);
  const std::size_t n = raw.rows(), d = raw.cols();
  spec.mean.assign(d, 0.0);
  spec.stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) spec.mean[j] += raw(i, j);
  for (auto& m : spec.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = raw(i, j) - spec.mean[j];
      spec.stddev[j] += dv * dv;
    }
  for (std::size_t j = 0; j < d; ++j) {
    const double s = std::sqrt(spec.stddev[j] / static_cast<double>(n));
    // Zero-variance features (up to round-off in the mean) keep unit scale.
    spec.stddev[j] = s <= 1e-12 * (1.0 + std::abs(spec.mean[j])) ? 1.0 : s;
  }
  return spec;
}

FeatureVector extract_features(const Trial& trial, const FeatureSpec& spec) {
  FeatureVector fv;
  fv.values = raw_features(trial, spec);
  normalise(fv.values, spec);
  fv.fingerprint = spec.fingerprint();
  return fv;
}

Matrix extract_features_batch_serial(const std::vector<Trial>& trials, const FeatureSpec& spec) {
  if (trials.empty()) return {};
  Matrix out(trials.size(), spec.feature_length(trials.front().channels()));
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto v = raw_features(trials[i], spec);
    normalise(v, spec);
    if (v.size() != out.cols()) throw InvalidInput("trial " + trials[i].trial_id + ": channel count differs");
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

Matrix extract_features_batch(const std::vector<Trial>& trials, const FeatureSpec& spec) {
  if (trials.empty()) return {};
  Matrix out(trials.size(), spec.feature_length(trials.front().channels()));
  const auto n = static_cast<std::ptrdiff_t>(trials.size());
  std::vector<std::string> errors(trials.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      auto v = raw_features(trials[k], spec);
      normalise(v, spec);
      if (v.size() != out.cols()) throw InvalidInput("trial " + trials[k].trial_id + ": channel count differs");
      std::copy(v.begin(), v.end(), out.row(k).begin());
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw InvalidInput(e);
  return out;
}

}  // namespace bci
