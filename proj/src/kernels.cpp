#include "bci/kernels.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bci::kernels {
namespace {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// FFTW planning is not thread-safe; executing an existing plan on new arrays
// is. Plans are created once per length under a lock and never destroyed.
class PlanCache {
 public:
  const PlanPair& get(std::size_t n) {
    std::lock_guard lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto real = fftw_alloc<double>(n);
    auto spec = fftw_alloc<fftw_complex>(n / 2 + 1);
    PlanPair p;
    const int len = static_cast<int>(n);
    p.forward = fftw_plan_dft_r2c_1d(len, real.get(), spec.get(), FFTW_ESTIMATE);
    p.inverse = fftw_plan_dft_c2r_1d(len, spec.get(), real.get(), FFTW_ESTIMATE);
    return plans_.emplace(n, p).first->second;
  }

 private:
  std::mutex mu_;
  std::map<std::size_t, PlanPair> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

BandBins band_bins(std::size_t n, double sampling_rate, double low_hz, double high_hz) {
  constexpr double eps = 1e-9;
  const double df = sampling_rate / static_cast<double>(n);
  const std::size_t nyquist = n / 2;
  auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(low_hz / df - eps)));
  double last_f = std::floor(high_hz / df + eps);
  if (last_f < 0.0 || first > nyquist || static_cast<double>(first) > last_f) {
    std::ostringstream os;
    os << "band " << low_hz << "-" << high_hz << " Hz contains no DFT bin for a " << n
       << "-sample frame at " << sampling_rate << " Hz";
    throw InvalidInput(os.str());
  }
  auto last = std::min(nyquist, static_cast<std::size_t>(last_f));
  return {first, last};
}

void spectral_filter_table(std::span<double> x, std::span<const double> gains) {
  const std::size_t n = x.size();
  if (n == 0) return;
  const auto& plans = plan_cache().get(n);
  auto real = fftw_alloc<double>(n);
  auto spec = fftw_alloc<fftw_complex>(n / 2 + 1);
  std::copy(x.begin(), x.end(), real.get());
  fftw_execute_dft_r2c(plans.forward, real.get(), spec.get());
  for (std::size_t k = 0; k <= n / 2; ++k) {
    spec[k][0] *= gains[k];
    spec[k][1] *= gains[k];
  }
  fftw_execute_dft_c2r(plans.inverse, spec.get(), real.get());
  // FFTW's inverse is unnormalised.
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = real[i] * scale;
}

std::vector<double> band_limit(std::span<const double> x, BandBins bins) {
  std::vector<double> out(x.begin(), x.end());
  spectral_filter(std::span<double>(out), [&](std::size_t k) {
    return (k >= bins.first_bin && k <= bins.last_bin) ? 1.0 : 0.0;
  });
  return out;
}

double band_limited_mean_square(std::span<const double> x, BandBins bins) {
  const auto y = band_limit(x, bins);
  double acc = 0.0;
  for (double v : y) acc += v * v;
  return acc / static_cast<double>(y.size());
}

namespace {

std::size_t frame_count(std::size_t length, std::size_t frame, std::size_t hop) {
  if (frame == 0 || hop == 0 || frame > length) return 0;
  return (length - frame) / hop + 1;
}

}  // namespace

Matrix band_power_rows_serial(const Matrix& signal, std::size_t frame, std::size_t hop,
                              BandBins bins) {
  const std::size_t frames = frame_count(signal.cols(), frame, hop);
  Matrix out(signal.rows(), frames);
  for (std::size_t r = 0; r < signal.rows(); ++r) {
    auto row = signal.row(r);
    for (std::size_t f = 0; f < frames; ++f)
      out(r, f) = band_limited_mean_square(row.subspan(f * hop, frame), bins);
  }
  return out;
}

Matrix band_power_rows(const Matrix& signal, std::size_t frame, std::size_t hop, BandBins bins) {
  const std::size_t frames = frame_count(signal.cols(), frame, hop);
  Matrix out(signal.rows(), frames);
  plan_cache().get(frame);
  const auto total = static_cast<std::ptrdiff_t>(signal.rows() * frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    const std::size_t r = static_cast<std::size_t>(i) / frames;
    const std::size_t f = static_cast<std::size_t>(i) % frames;
    out(r, f) = band_limited_mean_square(signal.row(r).subspan(f * hop, frame), bins);
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

namespace {

Nearest scan(const Matrix& exemplars, std::span<const double> q, std::ptrdiff_t skip) {
  Nearest best{0, INFINITY};
  for (std::size_t j = 0; j < exemplars.rows(); ++j) {
    if (static_cast<std::ptrdiff_t>(j) == skip) continue;
    const double d = squared_distance(exemplars.row(j), q);
    if (d < best.distance) best = {j, d};
  }
  return best;
}

}  // namespace

std::vector<Nearest> nearest_rows_serial(const Matrix& exemplars, const Matrix& queries) {
  std::vector<Nearest> out(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) out[i] = scan(exemplars, queries.row(i), -1);
  return out;
}

std::vector<Nearest> nearest_rows(const Matrix& exemplars, const Matrix& queries) {
  std::vector<Nearest> out(queries.rows());
  const auto n = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = scan(exemplars, queries.row(static_cast<std::size_t>(i)), -1);
  return out;
}

std::vector<double> loo_nearest_serial(const Matrix& rows) {
  std::vector<double> out(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i)
    out[i] = scan(rows, rows.row(i), static_cast<std::ptrdiff_t>(i)).distance;
  return out;
}

std::vector<double> loo_nearest(const Matrix& rows) {
  std::vector<double> out(rows.rows());
  const auto n = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = scan(rows, rows.row(static_cast<std::size_t>(i)), i).distance;
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace bci::kernels
