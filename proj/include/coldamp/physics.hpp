#pragma once

#include <complex>
#include <string>
#include <vector>

namespace coldamp {

using cplx = std::complex<double>;

/// Intrinsic pendulum mode. All frequencies are angular (rad/s).
struct OscillatorParams {
  double mass = 10.0;        // kg
  double omega0 = 0.0;       // natural angular frequency
  double q0 = 1e8;           // structural quality factor
  double temperature = 0.0;  // bath temperature, K

  void validate() const;
};

struct BackActionParams {
  double cavity_power = 0.0;  // W
  double finesse = 45.0;
  double wavelength = 1064e-9;  // m
  double antisqueeze_db = 8.0;  // 10 log10 e^{2r}

  void validate() const;
};

struct ComplexResponse {
  double frequency = 0.0;  // rad/s
  cplx value{};
};

enum class PsdUnit { DisplacementM2PerHz, ForceN2PerHz };

std::string to_string(PsdUnit u);

/// One-sided spectral density sampled on a strictly increasing grid (rad/s).
struct Psd {
  std::vector<double> grid;
  std::vector<double> values;
  PsdUnit unit = PsdUnit::DisplacementM2PerHz;

  /// Throws DomainError if the grid is not strictly increasing, sizes differ,
  /// or any value is negative or non-finite.
  void validate() const;
};

// Structural damping rate Gamma0[omega] = (omega0/q0)(omega0/omega).
double gamma0(double omega, const OscillatorParams& p);

/// Inverse susceptibility m(-omega^2 + omega0^2 + i omega Gamma0[omega]), N/m.
ComplexResponse chi0_inv(double omega, const OscillatorParams& p);

/// Thermal occupation in the high-temperature limit, kB T / (hbar omega).
/// The Bose correction is below 1e-10 relative anywhere near the trap.
double n_thermal(double omega, const OscillatorParams& p);

/// One-sided thermal force PSD 4 hbar (n_th + 1/2) Im chi0^{-1}, N^2/Hz.
double thermal_force_psd(double omega, const OscillatorParams& p);

/// White radiation-pressure force PSD (16 hbar F / (lambda c)) P_cav e^{2r}, N^2/Hz.
double backaction_force_psd(const BackActionParams& b);

/// Back-action expressed as an occupation: S_F^ba / (4 hbar Im chi0^{-1}).
double n_backaction(const BackActionParams& b, const OscillatorParams& p);
double n_backaction_from_psd(double s_ba, const OscillatorParams& p);

/// Cavity power that produces a requested back-action occupation.
double cavity_power_for_n_backaction(double n_ba, const BackActionParams& b, const OscillatorParams& p);

/// Zero-point amplitude squared x_zp^2 = hbar / (2 m omega), m^2.
double x_zp_squared(double omega, const OscillatorParams& p);

/// Peak zero-point displacement PSD 8 x_zp^2 / Gamma0, evaluated at omega_ref.
double zero_point_psd(double omega_ref, const OscillatorParams& p);

/// Phonon-equivalent imprecision S_imp / (2 S_zp[omega_ref]).
double n_imprecision(double s_imp, double omega_ref, const OscillatorParams& p);

}  // namespace coldamp
