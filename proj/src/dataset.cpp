#include "bci/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bci/kernels.hpp"
#include "bci/preprocess.hpp"

namespace bci {

std::string_view to_string(MovementClass c) {
  switch (c) {
    case MovementClass::RTR: return "RTR";
    case MovementClass::RTL: return "RTL";
    case MovementClass::WF: return "WF";
    case MovementClass::OTHER: return "OTHER";
  }
  return "OTHER";
}

MovementClass movement_class_from_string(std::string_view s) {
  if (s == "RTR") return MovementClass::RTR;
  if (s == "RTL") return MovementClass::RTL;
  if (s == "WF") return MovementClass::WF;
  if (s == "OTHER") return MovementClass::OTHER;
  throw InvalidInput("unknown movement class '" + std::string(s) + "'");
}

std::size_t Dataset::count(MovementClass c) const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [c](const Trial& t) { return t.label == c; }));
}

void validate_trial(const Trial& trial) {
  if (trial.label == MovementClass::OTHER)
    throw InvalidInput("trial " + trial.trial_id + ": OTHER is not a valid trial label");
  validate_signal(trial);
}

void validate_signal(const Trial& trial) {
  const auto fail = [&](const std::string& what) {
    throw InvalidInput("trial " + trial.trial_id + ": " + what);
  };
  if (trial.channels() < 1) fail("no channels");
  if (trial.onset_index == 0 || trial.onset_index >= trial.length()) fail("onset outside trial");
  for (std::size_t c = 0; c < trial.channels(); ++c) {
    auto row = trial.samples.row(c);
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (!std::isfinite(row[t]))
        fail("non-finite sample at channel " + std::to_string(c) + ", sample " + std::to_string(t));
    }
  }
}

void validate_dataset(const Dataset& ds) {
  if (!(ds.sampling_rate > 0.0)) throw InvalidInput("sampling rate must be positive");
  std::set<std::string> ids;
  for (const auto& t : ds.trials) {
    validate_trial(t);
    if (!ids.insert(t.trial_id).second) throw InvalidInput("trial " + t.trial_id + ": duplicate trial_id");
    const auto& first = ds.trials.front();
    if (t.channels() != first.channels() || t.length() != first.length())
      throw InvalidInput("trial " + t.trial_id + ": shape " + std::to_string(t.channels()) + "x" +
                         std::to_string(t.length()) + " differs from " +
                         std::to_string(first.channels()) + "x" + std::to_string(first.length()));
    if (!ds.channel_names.empty() && ds.channel_names.size() != t.channels())
      throw InvalidInput("trial " + t.trial_id + ": channel count does not match channel_names");
  }
}

// ---------------------------------------------------------------------------
// Synthesis

std::vector<double> SynthConfig::default_erd_depth(MovementClass c, std::size_t channels) {
  std::vector<double> depth(channels, 0.0);
  if (c == MovementClass::OTHER || channels == 0) return depth;
  const std::size_t base = 2 * class_index(c);
  depth[base % channels] = -0.1;
  depth[(base + 1) % channels] = -0.1;
  return depth;
}

std::vector<double> SynthConfig::depth_for(MovementClass c) const {
  auto it = erd_depth.find(c);
  if (it != erd_depth.end()) return it->second;
  return default_erd_depth(c, channels);
}

double SynthConfig::erp_polarity(MovementClass c, std::size_t channel) const {
  const std::size_t base = 2 * class_index(c);
  const bool first = channel == base % channels;
  const bool second = channel == (base + 1) % channels;
  if (!first && !second) return 0.0;
  switch (c) {
    case MovementClass::RTR: return 1.0;
    case MovementClass::RTL: return -1.0;
    case MovementClass::WF: return first ? 1.0 : -1.0;
    default: return 0.0;
  }
}

void SynthConfig::validate() const {
  const auto fail = [](const std::string& what) { throw InvalidInput("synth config: " + what); };
  if (channels < 1) fail("channels must be >= 1");
  if (!(sampling_rate > 0.0)) fail("sampling_rate must be > 0");
  if (!(onset_time_s > 0.0 && onset_time_s < trial_duration_s))
    fail("onset_time must lie strictly inside (0, trial_duration)");
  if (!(snr >= 0.0)) fail("snr must be >= 0");
  if (!(noise_rms >= 0.0)) fail("noise_rms must be >= 0");
  if (!std::isfinite(erp_amplitude) || !std::isfinite(noise_exponent)) fail("non-finite amplitude");
  if (counts.contains(MovementClass::OTHER)) fail("OTHER cannot be synthesized");
  for (const auto& [cls, depth] : erd_depth) {
    if (depth.size() != channels) fail("erd_depth for " + std::string(to_string(cls)) + " needs one value per channel");
    for (double d : depth)
      if (!(d >= -1.0) || !std::isfinite(d)) fail("erd_depth must be in [-1, inf)");
  }
  const auto length = std::lround(trial_duration_s * sampling_rate);
  const auto onset = std::lround(onset_time_s * sampling_rate);
  if (onset <= 0 || onset >= length) fail("onset sample outside trial");
}

namespace {

// SplitMix64; derives independent per-trial streams from the user seed.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> pink_noise(std::size_t n, double fs, double exponent, double rms,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = normal(rng);
  const double df = fs / static_cast<double>(n);
  kernels::spectral_filter(std::span<double>(x), [&](std::size_t k) {
    return k == 0 ? 0.0 : std::pow(static_cast<double>(k) * df, -exponent / 2.0);
  });
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(n);
  const double scale = ms > 0.0 ? rms / std::sqrt(ms) : 0.0;
  for (auto& v : x) v *= scale;
  return x;
}

Trial synthesize_trial(const SynthConfig& cfg, MovementClass cls, std::size_t index) {
  const double fs = cfg.sampling_rate;
  const auto n = static_cast<std::size_t>(std::lround(cfg.trial_duration_s * fs));
  const auto onset = static_cast<std::size_t>(std::lround(cfg.onset_time_s * fs));
  std::mt19937_64 rng(mix(cfg.seed ^ mix(class_index(cls) * 1000003ULL + index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto depth = cfg.depth_for(cls);
  // ERD envelope covers [onset - 1.5 s, onset + 1.5 s).
  const auto env_begin = static_cast<std::ptrdiff_t>(onset) - std::lround(1.5 * fs);
  const auto env_end = static_cast<std::ptrdiff_t>(onset) + std::lround(1.5 * fs);
  const auto erp_begin = static_cast<double>(onset) - 1.0 * fs;
  const auto erp_end = static_cast<double>(onset) + 1.5 * fs;

  const double nyq = fs / 2.0;
  const bool has_mu = kMuBand.high_hz <= nyq;
  const bool has_beta = kBetaBand.high_hz <= nyq;

  Trial trial;
  trial.label = cls;
  trial.onset_index = onset;
  trial.samples = Matrix(cfg.channels, n);
  {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%03zu", index);
    trial.trial_id = std::string(to_string(cls)) + "_" + buf;
  }

  for (std::size_t c = 0; c < cfg.channels; ++c) {
    auto x = pink_noise(n, fs, cfg.noise_exponent, cfg.noise_rms, rng);
    const double mu_f = 9.0 + 2.0 * unit(rng), mu_phase = 2.0 * std::numbers::pi * unit(rng);
    const double beta_f = 18.0 + 4.0 * unit(rng), beta_phase = 2.0 * std::numbers::pi * unit(rng);
    for (std::size_t t = 0; t < n; ++t) {
      const double time = static_cast<double>(t) / fs;
      if (has_mu) x[t] += cfg.mu_amplitude * std::sin(2.0 * std::numbers::pi * mu_f * time + mu_phase);
      if (has_beta)
        x[t] += cfg.beta_amplitude * std::sin(2.0 * std::numbers::pi * beta_f * time + beta_phase);
    }

    const double d = std::max(-0.95, cfg.snr * depth[c]);
    if (d != 0.0) {
      for (const auto& band : {kMuBand, kBetaBand}) {
        if (band.high_hz > nyq) continue;
        const auto comp = kernels::band_limit(x, kernels::band_bins(n, fs, band.low_hz, band.high_hz));
        for (auto t = std::max<std::ptrdiff_t>(0, env_begin);
             t < std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), env_end); ++t)
          x[static_cast<std::size_t>(t)] += d * comp[static_cast<std::size_t>(t)];
      }
    }

    const double erp = cfg.snr * cfg.erp_amplitude * cfg.erp_polarity(cls, c);
    if (erp != 0.0) {
      for (std::size_t t = 0; t < n; ++t) {
        const double s = static_cast<double>(t);
        double shape = 0.0;
        if (s >= erp_begin && s < static_cast<double>(onset))
          shape = (s - erp_begin) / (static_cast<double>(onset) - erp_begin);
        else if (s >= static_cast<double>(onset) && s < erp_end)
          shape = 1.0 - (s - static_cast<double>(onset)) / (erp_end - static_cast<double>(onset));
        x[t] += erp * shape;
      }
    }
    std::copy(x.begin(), x.end(), trial.samples.row(c).begin());
  }
  return trial;
}

}  // namespace

Dataset synthesize_dataset(const SynthConfig& config) {
  config.validate();
  Dataset ds;
  ds.sampling_rate = config.sampling_rate;
  for (std::size_t c = 0; c < config.channels; ++c) ds.channel_names.push_back("ch" + std::to_string(c));

  std::vector<std::pair<MovementClass, std::size_t>> jobs;
  for (auto cls : kTrainableClasses) {
    auto it = config.counts.find(cls);
    const std::size_t count = it == config.counts.end() ? 0 : it->second;
    for (std::size_t i = 0; i < count; ++i) jobs.emplace_back(cls, i);
  }
  ds.trials.resize(jobs.size());
  const auto total = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < total; ++j) {
    const auto& [cls, i] = jobs[static_cast<std::size_t>(j)];
    ds.trials[static_cast<std::size_t>(j)] = synthesize_trial(config, cls, i);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting and resampling

std::pair<Dataset, Dataset> split_half(const Dataset& ds, std::uint64_t seed) {
  Dataset train{ds.sampling_rate, ds.channel_names, {}};
  Dataset test{ds.sampling_rate, ds.channel_names, {}};
  std::vector<bool> in_train(ds.trials.size(), false);
  std::mt19937_64 rng(mix(seed));
  for (auto cls : kTrainableClasses) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.trials.size(); ++i)
      if (ds.trials[i].label == cls) idx.push_back(i);
    if (idx.empty()) continue;
    if (idx.size() < 2)
      throw InvalidInput("split_half: class " + std::string(to_string(cls)) + " has fewer than 2 trials");
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_train = (idx.size() + 1) / 2;
    for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = true;
  }
  for (std::size_t i = 0; i < ds.trials.size(); ++i)
    (in_train[i] ? train : test).trials.push_back(ds.trials[i]);
  return {std::move(train), std::move(test)};
}

std::vector<Trial> bootstrap_resample(const std::vector<Trial>& trials, std::size_t n,
                                      std::uint64_t seed) {
  if (n == 0) return {};
  if (trials.empty()) throw InvalidInput("bootstrap_resample: cannot draw from an empty trial list");
  std::mt19937_64 rng(mix(seed));
  std::uniform_int_distribution<std::size_t> pick(0, trials.size() - 1);
  std::vector<Trial> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Trial t = trials[pick(rng)];
    t.trial_id += "#bs" + std::to_string(k);
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

using nlohmann::json;

void write_trial_csv(const Trial& trial, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  std::string line;
  char buf[32];
  for (std::size_t t = 0; t < trial.length(); ++t) {
    line.clear();
    for (std::size_t c = 0; c < trial.channels(); ++c) {
      if (c) line.push_back(',');
      auto res = std::to_chars(buf, buf + sizeof buf, trial.samples(c, t));
      line.append(buf, res.ptr);
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

Matrix read_trial_csv(const std::filesystem::path& file, const std::string& trial_id) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InvalidInput("trial " + trial_id + ": cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    std::size_t col = 0;
    while (true) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) {
        throw InvalidInput("trial " + trial_id + ": " + file.filename().string() + " row " +
                           std::to_string(row_no) + " column " + std::to_string(col) +
                           ": not a number");
      }
      if (!std::isfinite(v)) {
        throw InvalidInput("trial " + trial_id + ": " + file.filename().string() + " row " +
                           std::to_string(row_no) + " column " + std::to_string(col) +
                           ": non-finite sample");
      }
      row.push_back(v);
      p = res.ptr;
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (*p != ',')
        throw InvalidInput("trial " + trial_id + ": " + file.filename().string() + " row " +
                           std::to_string(row_no) + ": malformed CSV");
      ++p;
      ++col;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidInput("trial " + trial_id + ": " + file.filename().string() + " row " +
                         std::to_string(row_no) + " has " + std::to_string(row.size()) +
                         " columns, expected " + std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
    ++row_no;
  }
  if (rows.empty()) throw InvalidInput("trial " + trial_id + ": " + file.string() + " is empty");
  Matrix m(rows.front().size(), rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t c = 0; c < rows[t].size(); ++c) m(c, t) = rows[t][c];
  return m;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  validate_dataset(ds);
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["sampling_rate_hz"] = ds.sampling_rate;
  manifest["channel_names"] = ds.channel_names;
  manifest["trials"] = json::array();
  for (const auto& t : ds.trials) {
    std::string file = t.trial_id + ".csv";
    std::replace(file.begin(), file.end(), '#', '_');
    write_trial_csv(t, dir / file);
    manifest["trials"].push_back({{"trial_id", t.trial_id},
                                  {"label", std::string(to_string(t.label))},
                                  {"onset_index", t.onset_index},
                                  {"file", file}});
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw InvalidInput("missing manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw InvalidInput("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  json entries;
  try {
    ds.sampling_rate = manifest.at("sampling_rate_hz").get<double>();
    ds.channel_names = manifest.at("channel_names").get<std::vector<std::string>>();
    entries = manifest.at("trials");
    if (!entries.is_array()) throw InvalidInput("manifest " + manifest_path.string() + ": trials must be an array");
  } catch (const json::exception& e) {
    throw InvalidInput("manifest " + manifest_path.string() + ": " + e.what());
  }
  std::set<std::string> ids;
  for (const auto& entry : entries) {
    Trial t;
    std::string file;
    try {
      t.trial_id = entry.at("trial_id").get<std::string>();
      t.label = movement_class_from_string(entry.at("label").get<std::string>());
      t.onset_index = entry.at("onset_index").get<std::size_t>();
      file = entry.at("file").get<std::string>();
    } catch (const json::exception& e) {
      throw InvalidInput("manifest trial entry: " + std::string(e.what()));
    }
    if (!ids.insert(t.trial_id).second) throw InvalidInput("trial " + t.trial_id + ": duplicate trial_id");
    t.samples = read_trial_csv(dir / file, t.trial_id);
    validate_trial(t);
    ds.trials.push_back(std::move(t));
  }
  validate_dataset(ds);
  return ds;
}

}  // namespace bci
