#include "coldamp/simkit.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"

namespace coldamp {

void TFMeasurement::validate() const {
  if (!(segment_duration > 0.0)) throw DomainError("tf: segment duration must be > 0");
  std::vector<double> f;
  for (const auto& p : points) {
    if (!(p.frequency > 0.0)) throw DomainError("tf: frequencies must be > 0");
    if (!(p.coherence >= 0.0 && p.coherence <= 1.0)) throw DomainError("tf: coherence outside [0, 1]");
    if (p.n_avg < 1) throw DomainError("tf: n_avg must be >= 1");
    if (!(p.sigma_g >= 0.0)) throw DomainError("tf: sigma_g must be >= 0");
    f.push_back(p.frequency);
  }
  std::sort(f.begin(), f.end());
  if (std::adjacent_find(f.begin(), f.end()) != f.end()) throw DomainError("tf: duplicate frequencies");
}

double SpectrumMeasurement::rel_sigma() const { return 1.0 / std::sqrt(static_cast<double>(n_avg)); }

void SpectrumMeasurement::validate() const {
  if (grid.size() != s_hat.size()) throw DomainError("spectrum: grid and values differ in length");
  if (n_avg < 1) throw DomainError("spectrum: n_avg must be >= 1");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw DomainError("spectrum: frequencies must be > 0");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("spectrum: grid must be strictly increasing");
    if (!(s_hat[i] >= 0.0)) throw DomainError("spectrum: negative PSD value");
  }
}

CoherenceProfile CoherenceProfile::constant(double c) { return {{1.0}, {c}}; }

double CoherenceProfile::at(double omega) const {
  if (values.size() == 1) return values[0];
  if (omega <= knots.front()) return values.front();
  if (omega >= knots.back()) return values.back();
  auto it = std::upper_bound(knots.begin(), knots.end(), omega);
  const std::size_t j = static_cast<std::size_t>(it - knots.begin());
  const double f = (omega - knots[j - 1]) / (knots[j] - knots[j - 1]);
  return values[j - 1] + f * (values[j] - values[j - 1]);
}

void CoherenceProfile::validate() const {
  if (values.empty() || knots.size() != values.size()) throw DomainError("coherence: knots and values differ");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0 && values[i] <= 1.0)) throw DomainError("coherence: values must lie in (0, 1]");
    if (i > 0 && !(knots[i] > knots[i - 1])) throw DomainError("coherence: knots must increase");
  }
}

double sigma_g(cplx g, double coherence, int n_avg) {
  if (!(coherence > 0.0)) throw DomainError("sigma_g: zero coherence gives infinite variance");
  if (coherence > 1.0) throw DomainError("sigma_g: coherence must be <= 1");
  if (n_avg < 1) throw DomainError("sigma_g: n_avg must be >= 1");
  return std::sqrt((1.0 - coherence) / (2.0 * coherence * n_avg)) * std::abs(g);
}

double sigma_c(double coherence, int n_avg) {
  if (!(coherence >= 0.0 && coherence <= 1.0)) throw DomainError("sigma_c: coherence must lie in [0, 1]");
  if (n_avg < 1) throw DomainError("sigma_c: n_avg must be >= 1");
  return std::sqrt(2.0 * coherence / n_avg) * (1.0 - coherence);
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  // SplitMix64 finaliser applied to a Weyl step of the master seed.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::mt19937_64 substream(std::uint64_t master, std::uint64_t index) {
  return std::mt19937_64(substream_seed(master, index));
}

TFMeasurement synth_tf(const std::function<cplx(double)>& model, const std::vector<double>& freqs,
                       const CoherenceProfile& coherence, int n_avg, std::uint64_t seed,
                       double segment_duration) {
  coherence.validate();
  TFMeasurement m;
  m.seed = seed;
  m.segment_duration = segment_duration;
  m.points.reserve(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const double w = freqs[i];
    const cplx g = model(w);
    const double c = coherence.at(w);
    const double s = sigma_g(g, c, n_avg);
    auto rng = substream(seed, i);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double re = nd(rng);
    const double im = nd(rng);
    TFPoint p;
    p.frequency = w;
    p.g_hat = g + s * cplx(re, im);
    p.coherence = c;
    p.n_avg = n_avg;
    p.sigma_g = sigma_g(p.g_hat, c, n_avg);
    m.points.push_back(p);
  }
  m.validate();
  return m;
}

SpectrumMeasurement synth_spectrum(const Psd& truth, int n_avg, std::uint64_t seed) {
  truth.validate();
  if (n_avg < 1) throw DomainError("synth_spectrum: n_avg must be >= 1");
  SpectrumMeasurement m;
  m.grid = truth.grid;
  m.n_avg = n_avg;
  m.seed = seed;
  m.s_hat.resize(truth.values.size());
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    auto rng = substream(seed, i);
    std::gamma_distribution<double> gd(static_cast<double>(n_avg), 1.0 / n_avg);
    m.s_hat[i] = truth.values[i] * gd(rng);
  }
  return m;
}

SpectrumMeasurement apply_calibration_error(const SpectrumMeasurement& m, const CalibrationError& e) {
  if (!(e.amplitude_scale > 0.0)) throw DomainError("calibration: amplitude scale must be > 0");
  SpectrumMeasurement out = m;
  const double s2 = e.amplitude_scale * e.amplitude_scale;
  for (auto& v : out.s_hat) v *= s2;
  return out;
}

TFMeasurement apply_calibration_error(const TFMeasurement& m, const CalibrationError& e) {
  if (!(e.amplitude_scale > 0.0)) throw DomainError("calibration: amplitude scale must be > 0");
  TFMeasurement out = m;
  for (auto& p : out.points) {
    p.g_hat *= e.amplitude_scale;
    p.sigma_g *= e.amplitude_scale;
  }
  return out;
}

SegmentEstimate simulate_segment_average(cplx g_true, double coherence, int n_avg, Excitation exc,
                                         std::mt19937_64& rng) {
  if (!(coherence > 0.0 && coherence <= 1.0) || n_avg < 1) throw DomainError("segment average: bad inputs");
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  const double noise_std = std::abs(g_true) * std::sqrt((1.0 - coherence) / coherence);
  std::uniform_real_distribution<double> ph(0.0, constants::two_pi);
  cplx sxy{};
  double sxx = 0.0, syy = 0.0;
  for (int k = 0; k < n_avg; ++k) {
    cplx x;
    if (exc == Excitation::GaussianNoise) {
      x = cplx(nd(rng), nd(rng));
    } else {
      x = std::polar(1.0, ph(rng));
    }
    const cplx v = noise_std * cplx(nd(rng), nd(rng));
    const cplx y = g_true * x + v;
    sxy += y * std::conj(x);
    sxx += std::norm(x);
    syy += std::norm(y);
  }
  return {sxy / sxx, std::norm(sxy) / (sxx * syy)};
}

std::vector<double> time_series_from_psd(const std::function<double(double)>& psd_per_hz, double fs,
                                         std::size_t n, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0 || !(fs > 0.0)) throw DomainError("time series: need even n >= 2 and fs > 0");
  const std::size_t nf = n / 2 + 1;
  const double df = fs / static_cast<double>(n);
  auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nf));
  std::vector<double> out(n);
  auto rng = substream(seed, 0);
  std::normal_distribution<double> nd(0.0, 1.0);
  // One-sided S(f) df is the variance carried by bin f. The c2r sum yields 2 Re(X_k e^{...}),
  // whose mean square is 2|X_k|^2, hence var/4 per quadrature; the Nyquist bin enters once.
  for (std::size_t k = 0; k < nf; ++k) {
    double re = 0.0, im = 0.0;
    if (k > 0) {
      const double var = psd_per_hz(static_cast<double>(k) * df) * df;
      if (k == nf - 1) {
        re = std::sqrt(var) * nd(rng);
      } else {
        re = 0.5 * std::sqrt(var) * nd(rng);
        im = 0.5 * std::sqrt(var) * nd(rng);
      }
    }
    spec[k][0] = re;
    spec[k][1] = im;
  }
  fftw_plan plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, out.data(), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  fftw_free(spec);
  return out;
}

}  // namespace coldamp
