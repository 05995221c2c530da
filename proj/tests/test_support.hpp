#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "bci/dataset.hpp"
#include "bci/types.hpp"

namespace bci::test {

// Trial whose sample (c, t) is f(c, t / fs).
inline Trial make_trial(std::size_t channels, std::size_t length, std::size_t onset, double fs,
                        const std::function<double(std::size_t, double)>& f,
                        MovementClass label = MovementClass::RTR, std::string id = "t0") {
  Trial t;
  t.label = label;
  t.onset_index = onset;
  t.trial_id = std::move(id);
  t.samples = Matrix(channels, length);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < length; ++i) t.samples(c, i) = f(c, static_cast<double>(i) / fs);
  return t;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

inline double sine(double amp, double hz, double t, double phase = 0.0) {
  return amp * std::sin(2.0 * std::numbers::pi * hz * t + phase);
}

// Independent O(n^2) DFT band power: mean square of the band-limited signal
// via Parseval, counting each positive-frequency bin twice except DC/Nyquist.
inline double naive_band_power(const std::vector<double>& x, double fs, double lo, double hi) {
  const std::size_t n = x.size();
  double acc = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f < lo - 1e-9 || f > hi + 1e-9) continue;
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      re += x[i] * std::cos(a);
      im += x[i] * std::sin(a);
    }
    const double mag2 = re * re + im * im;
    const bool self_conjugate = k == 0 || (n % 2 == 0 && k == n / 2);
    acc += (self_conjugate ? 1.0 : 2.0) * mag2;
  }
  return acc / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace bci::test
