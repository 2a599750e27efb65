#include "awe/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "awe/error.hpp"

namespace awe::features {

namespace {

// The FFTW planner is not re-entrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

void FeatureSequence::validate() const {
  if (frames.rows() < 1 || frames.cols() < 1) {
    throw DataError("feature sequence must have at least one frame and one coefficient");
  }
  if (!frames.all_finite()) throw DataError("feature sequence contains non-finite values");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop) {
  if (n_samples < window || hop == 0) return 0;
  return (n_samples - window) / hop + 1;
}

std::vector<double> mel_center_frequencies(double sample_rate, const MelConfig& config) {
  const double high = config.high_hz > 0.0 ? config.high_hz : sample_rate / 2.0;
  const double lo = hz_to_mel(config.low_hz), hi = hz_to_mel(high);
  std::vector<double> centers(config.num_filters);
  for (std::size_t m = 0; m < config.num_filters; ++m) {
    centers[m] = mel_to_hz(lo + (hi - lo) * static_cast<double>(m + 1) /
                                    static_cast<double>(config.num_filters + 1));
  }
  return centers;
}

FeatureSequence mel_spectra(std::span<const double> samples, double sample_rate,
                            const MelConfig& config) {
  if (sample_rate < 8000.0) throw ConfigError("mel_spectra: sample rate must be >= 8000 Hz");
  if (config.num_filters == 0) throw ConfigError("mel_spectra: need at least one filter");
  for (double s : samples) {
    if (!std::isfinite(s)) throw DataError("mel_spectra: non-finite PCM sample");
  }
  const auto window = static_cast<std::size_t>(std::llround(config.frame_length_ms * sample_rate / 1000.0));
  const auto hop = static_cast<std::size_t>(std::llround(config.frame_shift_ms * sample_rate / 1000.0));
  if (window == 0 || hop == 0) throw ConfigError("mel_spectra: window and shift must be positive");
  const std::size_t n_frames = frame_count(samples.size(), window, hop);
  if (n_frames == 0) {
    throw DataError("mel_spectra: audio of " + std::to_string(samples.size()) +
                    " samples is shorter than one " + std::to_string(window) + "-sample window");
  }

  const std::size_t nfft = next_pow2(window);
  const std::size_t nbins = nfft / 2 + 1;
  const double high = config.high_hz > 0.0 ? config.high_hz : sample_rate / 2.0;

  // Triangular filters with unit peak, edges equally spaced on the mel scale.
  const std::size_t nf = config.num_filters;
  std::vector<double> edges(nf + 2);
  const double mlo = hz_to_mel(config.low_hz), mhi = hz_to_mel(high);
  for (std::size_t i = 0; i < nf + 2; ++i) {
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / static_cast<double>(nf + 1));
  }
  nn::Tensor bank(nf, nbins);
  for (std::size_t m = 0; m < nf; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    for (std::size_t b = 0; b < nbins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / static_cast<double>(nfft);
      double w = 0.0;
      if (f > left && f <= centre) {
        w = (f - left) / (centre - left);
      } else if (f > centre && f < right) {
        w = (right - f) / (right - centre);
      }
      bank(m, b) = w;
    }
  }

  std::vector<double> win(window, 1.0);
  if (config.hamming && window > 1) {
    for (std::size_t i = 0; i < window; ++i) {
      win[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(window - 1));
    }
  }

  using RealBuf = std::unique_ptr<double, decltype(&fftw_free)>;
  using CplxBuf = std::unique_ptr<fftw_complex, decltype(&fftw_free)>;
  RealBuf in(static_cast<double*>(fftw_malloc(sizeof(double) * nfft)), &fftw_free);
  CplxBuf out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nbins)), &fftw_free);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.get(), out.get(), FFTW_ESTIMATE);
  }

  FeatureSequence seq;
  seq.frame_length_ms = config.frame_length_ms;
  seq.frame_shift_ms = config.frame_shift_ms;
  seq.frames = nn::Tensor(n_frames, nf);
  std::vector<double> power(nbins);
  const double floor_log = std::log(config.log_floor);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * hop;
    double* buf = in.get();
    for (std::size_t i = 0; i < nfft; ++i) {
      double s = 0.0;
      if (i < window) {
        s = samples[start + i];
        if (config.preemphasis != 0.0) {
          const double prev = start + i > 0 ? samples[start + i - 1] : 0.0;
          s -= config.preemphasis * prev;
        }
        s *= win[i];
      }
      buf[i] = s;
    }
    fftw_execute(plan);
    for (std::size_t b = 0; b < nbins; ++b) {
      const double re = out.get()[b][0], im = out.get()[b][1];
      power[b] = re * re + im * im;
    }
    for (std::size_t m = 0; m < nf; ++m) {
      double e = 0.0;
      for (std::size_t b = 0; b < nbins; ++b) e += bank(m, b) * power[b];
      seq.frames(t, m) = e > config.log_floor ? std::log(e) : floor_log;
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return seq;
}

}  // namespace awe::features
