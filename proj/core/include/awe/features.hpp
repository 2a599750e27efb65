#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "awe/tensor.hpp"

namespace awe::features {

// One spoken-word segment: T frames of k spectral coefficients.
struct FeatureSequence {
  nn::Tensor frames;  // T x k
  double frame_shift_ms = 10.0;
  double frame_length_ms = 25.0;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
  // Throws DataError unless T >= 1, k >= 1 and every value is finite.
  void validate() const;
};

struct MelConfig {
  std::size_t num_filters = 39;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double low_hz = 0.0;
  double high_hz = 0.0;  // 0 means Nyquist
  double log_floor = 1e-10;
  bool hamming = true;
  double preemphasis = 0.0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// floor((n_samples - window) / hop) + 1, or 0 when n_samples < window.
std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop);

// Centre frequency (Hz) of every triangular filter.
std::vector<double> mel_center_frequencies(double sample_rate, const MelConfig& config = {});

// Log mel filterbank energies (no DCT): one row per 25 ms window every 10 ms
// by default, each entry ln(max(energy, log_floor)).
FeatureSequence mel_spectra(std::span<const double> samples, double sample_rate,
                            const MelConfig& config = {});

}  // namespace awe::features
