#pragma once

// Data-parallel kernels. Every kernel has a serial reference (`*_serial`) and an
// OpenMP variant; both produce bit-identical results because each output slot
// is written by exactly one iteration and per-slot reductions run in the same
// order.

#include <cstddef>
#include <span>
#include <vector>

#include "bci/types.hpp"

namespace bci::kernels {

struct BandBins {
  std::size_t first_bin = 0;  // inclusive
  std::size_t last_bin = 0;   // inclusive
};

// Bins k of an n-point real DFT with low <= k*fs/n <= high. Throws InvalidInput
// when no bin falls in the band.
BandBins band_bins(std::size_t n, double sampling_rate, double low_hz, double high_hz);

// Multiplies DFT bin k (0..n/2) of x by gain(k) and transforms back, in place.
template <typename Gain>
void spectral_filter(std::span<double> x, Gain&& gain);

void spectral_filter_table(std::span<double> x, std::span<const double> gains);

// Signal with all DFT bins outside `bins` zeroed.
std::vector<double> band_limit(std::span<const double> x, BandBins bins);

// Mean square of x after zeroing all DFT bins outside `bins`.
double band_limited_mean_square(std::span<const double> x, BandBins bins);

// Band power frames for every row of `signal`: out(row, f) covers samples
// [f*hop, f*hop + frame).
Matrix band_power_rows_serial(const Matrix& signal, std::size_t frame, std::size_t hop,
                              BandBins bins);
Matrix band_power_rows(const Matrix& signal, std::size_t frame, std::size_t hop, BandBins bins);

double squared_distance(std::span<const double> a, std::span<const double> b);

struct Nearest {
  std::size_t index = 0;
  double distance = 0.0;
};

// Nearest row of `exemplars` for each row of `queries`; ties -> lowest index.
std::vector<Nearest> nearest_rows_serial(const Matrix& exemplars, const Matrix& queries);
std::vector<Nearest> nearest_rows(const Matrix& exemplars, const Matrix& queries);

// Leave-one-out nearest-neighbour distance of every row against all others.
std::vector<double> loo_nearest_serial(const Matrix& rows);
std::vector<double> loo_nearest(const Matrix& rows);

int max_threads();

template <typename Gain>
void spectral_filter(std::span<double> x, Gain&& gain) {
  std::vector<double> gains(x.size() / 2 + 1);
  for (std::size_t k = 0; k < gains.size(); ++k) gains[k] = gain(k);
  spectral_filter_table(x, gains);
}

}  // namespace bci::kernels
