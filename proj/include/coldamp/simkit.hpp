#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "coldamp/physics.hpp"

namespace coldamp {

struct TFPoint {
  double frequency = 0.0;  // rad/s
  cplx g_hat{};
  double coherence = 1.0;
  int n_avg = 1;
  double sigma_g = 0.0;  // std of |g_hat|, equal to the std of each quadrature
};

struct TFMeasurement {
  std::vector<TFPoint> points;
  double segment_duration = 1.0;  // s per average
  std::uint64_t seed = 0;

  double bin_width_hz() const { return 1.0 / segment_duration; }
  void validate() const;
};

struct SpectrumMeasurement {
  std::vector<double> grid;   // rad/s
  std::vector<double> s_hat;  // m^2/Hz
  int n_avg = 1;
  std::uint64_t seed = 0;

  double rel_sigma() const;
  void validate() const;
};

struct CalibrationError {
  double amplitude_scale = 1.0;
};

/// Linear interpolation in frequency between knots; a single knot is a constant profile.
struct CoherenceProfile {
  std::vector<double> knots;  // rad/s
  std::vector<double> values;

  static CoherenceProfile constant(double c);
  double at(double omega) const;
  void validate() const;
};

double sigma_g(cplx g, double coherence, int n_avg);
double sigma_c(double coherence, int n_avg);

/// Independent 64-bit seed for stream `index` derived from `master`.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index);
std::mt19937_64 substream(std::uint64_t master, std::uint64_t index);

/// Noisy transfer-function estimate: each quadrature perturbed with std sigma_g of the true value.
TFMeasurement synth_tf(const std::function<cplx(double)>& model, const std::vector<double>& freqs,
                       const CoherenceProfile& coherence, int n_avg, std::uint64_t seed,
                       double segment_duration = 1.0);

/// Each bin scaled by chi^2_{2N} / 2N.
SpectrumMeasurement synth_spectrum(const Psd& truth, int n_avg, std::uint64_t seed);

SpectrumMeasurement apply_calibration_error(const SpectrumMeasurement& m, const CalibrationError& e);
TFMeasurement apply_calibration_error(const TFMeasurement& m, const CalibrationError& e);

enum class Excitation { GaussianNoise, SweptSine };

struct SegmentEstimate {
  cplx g_hat{};
  double coherence = 0.0;
};

/// Averaged cross-spectral estimate (H1) of a single bin from n_avg segments of
/// excitation plus incoherent output noise sized to give the requested coherence.
SegmentEstimate simulate_segment_average(cplx g_true, double coherence, int n_avg, Excitation exc,
                                         std::mt19937_64& rng);

/// Random-phase time series with the given one-sided PSD (per Hz), sampled at fs.
std::vector<double> time_series_from_psd(const std::function<double(double)>& psd_per_hz, double fs,
                                         std::size_t n, std::uint64_t seed);

}  // namespace coldamp
